#include "dyhfl/paillier.hpp"

#include <cmath>
#include <string>

#include "dyhfl/rng.hpp"
#include "json.hpp"

namespace dyhfl::he {
namespace {

// L(x) = (x - 1) / n
BigInt l_function(const BigInt& x, const BigInt& n) { return (x - 1) / n; }

BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

BigInt invert(const BigInt& a, const BigInt& mod) {
  BigInt out;
  if (mpz_invert(out.get_mpz_t(), a.get_mpz_t(), mod.get_mpz_t()) == 0) {
    throw PaillierError("value not invertible");
  }
  return out;
}

BigInt random_prime(RandomSource& rng, unsigned bits) {
  for (;;) {
    BigInt candidate = rng.bits(bits);
    // Top two bits set so that p*q has exactly 2*bits bits.
    mpz_setbit(candidate.get_mpz_t(), bits - 1);
    mpz_setbit(candidate.get_mpz_t(), bits - 2);
    BigInt p;
    mpz_nextprime(p.get_mpz_t(), candidate.get_mpz_t());
    if (mpz_sizeinbase(p.get_mpz_t(), 2) == bits) return p;
  }
}

std::string hex(const BigInt& v) { return v.get_str(16); }

BigInt from_hex(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) throw PaillierError(std::string("missing field '") + field + "'");
  BigInt v;
  if (v.set_str(j.at(field).get<std::string>(), 16) != 0) {
    throw PaillierError(std::string("field '") + field + "' is not hex");
  }
  return v;
}

}  // namespace

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed), state_(gmp_randinit_mt) {
  BigInt s(static_cast<unsigned long>(seed >> 32));
  s <<= 32;
  s += static_cast<unsigned long>(seed & 0xffffffffULL);
  state_.seed(s);
}

BigInt RandomSource::below(const BigInt& bound) { return state_.get_z_range(bound); }

BigInt RandomSource::bits(unsigned count) { return state_.get_z_bits(count); }

RandomSource RandomSource::derive(std::uint64_t index) const {
  return RandomSource(derive_seed(seed_, {index}));
}

KeyPair keygen(unsigned bits, std::uint64_t rng_seed) {
  if (bits != 512 && bits != 1024 && bits != 2048) {
    throw PaillierError("unsupported key size " + std::to_string(bits));
  }
  RandomSource rng(rng_seed);
  for (;;) {
    BigInt p = random_prime(rng, bits / 2);
    BigInt q = random_prime(rng, bits / 2);
    if (p == q) continue;
    BigInt n = p * q;
    BigInt phi = (p - 1) * (q - 1);
    BigInt g;
    mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
    if (g != 1) continue;

    KeyPair kp;
    kp.pub.n = n;
    kp.pub.n_squared = n * n;
    kp.pub.g = n + 1;
    kp.pub.bits = bits;
    mpz_lcm(kp.priv.lambda.get_mpz_t(), BigInt(p - 1).get_mpz_t(), BigInt(q - 1).get_mpz_t());
    kp.priv.n = n;
    BigInt u = powm(kp.pub.g, kp.priv.lambda, kp.pub.n_squared);
    kp.priv.mu = invert(l_function(u, n), n);
    return kp;
  }
}

Ciphertext encrypt_with_nonce(const PublicKey& pk, const BigInt& m, const BigInt& r) {
  if (m < 0 || m >= pk.n) throw PaillierError("plaintext out of range [0, n)");
  // g = n + 1, so g^m = 1 + m*n (mod n^2).
  BigInt gm = (1 + m * pk.n) % pk.n_squared;
  BigInt rn = powm(r, pk.n, pk.n_squared);
  return Ciphertext{(gm * rn) % pk.n_squared};
}

Ciphertext encrypt(const PublicKey& pk, const BigInt& m, RandomSource& rng) {
  if (m < 0 || m >= pk.n) throw PaillierError("plaintext out of range [0, n)");
  BigInt r;
  BigInt g;
  do {
    r = rng.below(pk.n - 1) + 1;
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t());
  } while (g != 1);
  return encrypt_with_nonce(pk, m, r);
}

BigInt decrypt(const PrivateKey& sk, const Ciphertext& c) {
  BigInt n2 = sk.n * sk.n;
  BigInt u = powm(c.value, sk.lambda, n2);
  return (l_function(u, sk.n) * sk.mu) % sk.n;
}

Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  return Ciphertext{(a.value * b.value) % pk.n_squared};
}

Ciphertext scalar_mul(const PublicKey& pk, const Ciphertext& a, const BigInt& k) {
  if (k < 0) throw PaillierError("scalar must be non-negative");
  return Ciphertext{powm(a.value, k, pk.n_squared)};
}

FixedPointCodec::FixedPointCodec(BigInt modulus, std::uint64_t scale)
    : modulus_(std::move(modulus)), half_(modulus_ / 2), scale_(scale) {
  if (scale_ < 1000) throw PaillierError("codec scale must be >= 1000");
  if (modulus_ <= 0) throw PaillierError("codec modulus must be positive");
}

BigInt FixedPointCodec::encode(double x) const {
  if (!std::isfinite(x)) throw PaillierError("cannot encode non-finite value");
  BigInt magnitude;
  mpz_set_d(magnitude.get_mpz_t(), std::round(std::fabs(x) * static_cast<double>(scale_)));
  if (magnitude >= half_) throw PaillierError("fixed-point overflow: |x|*scale >= n/2");
  if (x < 0 && magnitude != 0) return modulus_ - magnitude;
  return magnitude;
}

double FixedPointCodec::decode(const BigInt& v) const {
  const double s = static_cast<double>(scale_);
  if (v > half_) {
    BigInt magnitude = modulus_ - v;
    return -magnitude.get_d() / s;
  }
  return v.get_d() / s;
}

EncryptedVector encrypt_vector(const PublicKey& pk, const FixedPointCodec& codec,
                               std::span<const double> v, RandomSource& rng) {
  EncryptedVector out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    BigInt m;
    try {
      m = codec.encode(v[i]);
    } catch (const PaillierError& e) {
      throw PaillierError("component " + std::to_string(i) + ": " + e.what());
    }
    out.push_back(encrypt(pk, m, rng));
  }
  return out;
}

std::vector<double> decrypt_vector(const PrivateKey& sk, const FixedPointCodec& codec,
                                   const EncryptedVector& ev) {
  std::vector<double> out;
  out.reserve(ev.size());
  for (const Ciphertext& c : ev) out.push_back(codec.decode(decrypt(sk, c)));
  return out;
}

std::string to_text(const PublicKey& pk) {
  return nlohmann::json{{"n", hex(pk.n)}, {"g", hex(pk.g)}}.dump();
}

std::string to_text(const PrivateKey& sk) {
  return nlohmann::json{{"lambda", hex(sk.lambda)}, {"mu", hex(sk.mu)}, {"n", hex(sk.n)}}.dump();
}

std::string to_text(const Ciphertext& c) { return nlohmann::json{{"value", hex(c.value)}}.dump(); }

std::string to_text(const FixedPointCodec& codec) {
  return nlohmann::json{{"n", hex(codec.modulus())}, {"scale", codec.scale()}}.dump();
}

PublicKey public_key_from_text(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  PublicKey pk;
  pk.n = from_hex(j, "n");
  pk.g = from_hex(j, "g");
  if (pk.g != pk.n + 1) throw PaillierError("g must equal n + 1");
  pk.n_squared = pk.n * pk.n;
  pk.bits = static_cast<unsigned>(mpz_sizeinbase(pk.n.get_mpz_t(), 2));
  return pk;
}

PrivateKey private_key_from_text(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  return PrivateKey{from_hex(j, "lambda"), from_hex(j, "mu"), from_hex(j, "n")};
}

Ciphertext ciphertext_from_text(const std::string& text) {
  return Ciphertext{from_hex(nlohmann::json::parse(text), "value")};
}

FixedPointCodec codec_from_text(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  return FixedPointCodec(from_hex(j, "n"), j.at("scale").get<std::uint64_t>());
}

}  // namespace dyhfl::he
