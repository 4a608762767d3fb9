#ifndef DYHFL_PAILLIER_HPP_
#define DYHFL_PAILLIER_HPP_

#include <gmpxx.h>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyhfl::he {

using BigInt = mpz_class;

struct PublicKey {
  BigInt n;
  BigInt n_squared;
  BigInt g;  // always n + 1
  unsigned bits = 0;
};

struct PrivateKey {
  BigInt lambda;
  BigInt mu;
  BigInt n;
};

struct KeyPair {
  PublicKey pub;
  PrivateKey priv;
};

struct Ciphertext {
  BigInt value;

  friend bool operator==(const Ciphertext& a, const Ciphertext& b) { return a.value == b.value; }
};

using EncryptedVector = std::vector<Ciphertext>;

class PaillierError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Seeded source of big-integer randomness. Not thread-safe; give each worker
// its own instance (see derive()).
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  // Uniform in [0, bound).
  BigInt below(const BigInt& bound);
  BigInt bits(unsigned count);
  std::uint64_t seed() const { return seed_; }

  // Independent stream for worker `index`, a pure function of (seed, index).
  RandomSource derive(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  gmp_randclass state_;
};

// bits must be 512, 1024 or 2048. Same (bits, seed) gives identical keys.
KeyPair keygen(unsigned bits, std::uint64_t rng_seed);

// m in [0, n). Draws the nonce from rng.
Ciphertext encrypt(const PublicKey& pk, const BigInt& m, RandomSource& rng);
// Deterministic encryption with an explicit nonce r, gcd(r, n) = 1.
Ciphertext encrypt_with_nonce(const PublicKey& pk, const BigInt& m, const BigInt& r);

// Returns the residue in [0, n). Decrypting under a non-matching key yields an
// arbitrary residue; there is no integrity check.
BigInt decrypt(const PrivateKey& sk, const Ciphertext& c);

// Homomorphic addition: Dec(add(a, b)) = Dec(a) + Dec(b) mod n.
Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);
// Homomorphic plaintext scaling: Dec(scalar_mul(a, k)) = k * Dec(a) mod n.
Ciphertext scalar_mul(const PublicKey& pk, const Ciphertext& a, const BigInt& k);

/// Signed fixed-point encoding of reals into Z_n.
///
/// x >= 0 encodes as round(x * scale); x < 0 as n - round(|x| * scale). Residues
/// above n/2 decode as negative, so any sum whose true magnitude stays below
/// n/2 decodes correctly after homomorphic addition.
class FixedPointCodec {
 public:
  static constexpr std::uint64_t kDefaultScale = 1'000'000;

  FixedPointCodec(BigInt modulus, std::uint64_t scale = kDefaultScale);

  BigInt encode(double x) const;
  double decode(const BigInt& v) const;

  std::uint64_t scale() const { return scale_; }
  const BigInt& modulus() const { return modulus_; }

 private:
  BigInt modulus_;
  BigInt half_;
  std::uint64_t scale_;
};

EncryptedVector encrypt_vector(const PublicKey& pk, const FixedPointCodec& codec,
                               std::span<const double> v, RandomSource& rng);
std::vector<double> decrypt_vector(const PrivateKey& sk, const FixedPointCodec& codec,
                                   const EncryptedVector& ev);

// Text fixtures: JSON objects with hex-encoded big integers.
std::string to_text(const PublicKey& pk);
std::string to_text(const PrivateKey& sk);
std::string to_text(const Ciphertext& c);
std::string to_text(const FixedPointCodec& codec);
PublicKey public_key_from_text(const std::string& text);
PrivateKey private_key_from_text(const std::string& text);
Ciphertext ciphertext_from_text(const std::string& text);
FixedPointCodec codec_from_text(const std::string& text);

}  // namespace dyhfl::he

#endif  // DYHFL_PAILLIER_HPP_
