#ifndef DYHFL_AGGREGATION_HPP_
#define DYHFL_AGGREGATION_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dyhfl/paillier.hpp"

namespace dyhfl::fl {

enum class Encryption { kPaillier, kPlain };

Encryption parse_encryption(const std::string& name);
std::string to_string(Encryption e);

/// Element-wise ciphertext sum of the participants' encrypted models.
he::EncryptedVector secure_aggregate(std::span<const he::EncryptedVector> encrypted_models, const he::PublicKey& pk);

/// Agent-side step after decrypting the aggregated sum: divide by the
/// participant count broadcast alongside it.
///
/// Averaging happens here, in plaintext, instead of multiplying the encrypted
/// sum by the modular inverse of N: that inverse is an element of Z_n, and
/// (sum * N^-1 mod n) does not decode to sum / N under fixed-point encoding.
std::vector<double> finalize_average(std::span<const double> decrypted_sum, std::size_t participant_count);

/// Model transport between agents and the aggregation server, either Paillier
/// encrypted or plain. Agents seal and open; the server only sums sealed
/// payloads.
class SecureChannel {
 public:
  using Sealed = std::variant<std::vector<double>, he::EncryptedVector>;

  static SecureChannel plain();
  static SecureChannel paillier(unsigned key_bits, std::uint64_t seed,
                                std::uint64_t scale = he::FixedPointCodec::kDefaultScale);

  Encryption mode() const { return mode_; }

  // `stream` selects the encryption nonce stream; pass a value unique per
  // (round, agent, message).
  Sealed seal(std::span<const double> params, std::uint64_t stream) const;
  std::vector<double> open(const Sealed& sealed) const;
  Sealed sum(std::span<const Sealed> sealed) const;

  // Seal each vector, sum server-side, open, divide by N.
  std::vector<double> average(std::span<const std::vector<double>> params, std::uint64_t stream_base) const;

  const std::optional<he::KeyPair>& keys() const { return keys_; }

 private:
  SecureChannel() = default;

  Encryption mode_ = Encryption::kPlain;
  std::optional<he::KeyPair> keys_;
  std::optional<he::FixedPointCodec> codec_;
  std::uint64_t seed_ = 0;
};

}  // namespace dyhfl::fl

#endif  // DYHFL_AGGREGATION_HPP_
