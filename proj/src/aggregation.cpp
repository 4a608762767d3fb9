#include "dyhfl/aggregation.hpp"

#include <stdexcept>

#include "dyhfl/rng.hpp"

namespace dyhfl::fl {

Encryption parse_encryption(const std::string& name) {
  if (name == "paillier") return Encryption::kPaillier;
  if (name == "plain") return Encryption::kPlain;
  throw std::invalid_argument("unknown encryption mode '" + name + "'");
}

std::string to_string(Encryption e) { return e == Encryption::kPaillier ? "paillier" : "plain"; }

he::EncryptedVector secure_aggregate(std::span<const he::EncryptedVector> encrypted_models, const he::PublicKey& pk) {
  if (encrypted_models.empty()) throw std::invalid_argument("secure_aggregate needs at least one model");
  he::EncryptedVector acc = encrypted_models.front();
  for (std::size_t m = 1; m < encrypted_models.size(); ++m) {
    const auto& next = encrypted_models[m];
    if (next.size() != acc.size()) {
      throw std::invalid_argument("encrypted model length mismatch: " + std::to_string(next.size()) + " vs " +
                                  std::to_string(acc.size()));
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = he::add(pk, acc[i], next[i]);
  }
  return acc;
}

std::vector<double> finalize_average(std::span<const double> decrypted_sum, std::size_t participant_count) {
  if (participant_count == 0) throw std::invalid_argument("cannot average over zero participants");
  std::vector<double> out(decrypted_sum.begin(), decrypted_sum.end());
  const double n = static_cast<double>(participant_count);
  for (double& v : out) v /= n;
  return out;
}

SecureChannel SecureChannel::plain() { return SecureChannel(); }

SecureChannel SecureChannel::paillier(unsigned key_bits, std::uint64_t seed, std::uint64_t scale) {
  SecureChannel ch;
  ch.mode_ = Encryption::kPaillier;
  ch.seed_ = seed;
  ch.keys_ = he::keygen(key_bits, derive_seed(seed, {0x6b65}));
  ch.codec_.emplace(ch.keys_->pub.n, scale);
  return ch;
}

SecureChannel::Sealed SecureChannel::seal(std::span<const double> params, std::uint64_t stream) const {
  if (mode_ == Encryption::kPlain) return std::vector<double>(params.begin(), params.end());
  he::RandomSource rng(derive_seed(seed_, {0x6e6f, stream}));
  return he::encrypt_vector(keys_->pub, *codec_, params, rng);
}

std::vector<double> SecureChannel::open(const Sealed& sealed) const {
  if (mode_ == Encryption::kPlain) return std::get<std::vector<double>>(sealed);
  return he::decrypt_vector(keys_->priv, *codec_, std::get<he::EncryptedVector>(sealed));
}

SecureChannel::Sealed SecureChannel::sum(std::span<const Sealed> sealed) const {
  if (sealed.empty()) throw std::invalid_argument("cannot sum zero payloads");
  if (mode_ == Encryption::kPaillier) {
    std::vector<he::EncryptedVector> models;
    models.reserve(sealed.size());
    for (const auto& s : sealed) models.push_back(std::get<he::EncryptedVector>(s));
    return secure_aggregate(models, keys_->pub);
  }
  std::vector<double> acc = std::get<std::vector<double>>(sealed.front());
  for (std::size_t m = 1; m < sealed.size(); ++m) {
    const auto& next = std::get<std::vector<double>>(sealed[m]);
    if (next.size() != acc.size()) throw std::invalid_argument("model length mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += next[i];
  }
  return acc;
}

std::vector<double> SecureChannel::average(std::span<const std::vector<double>> params,
                                           std::uint64_t stream_base) const {
  std::vector<Sealed> sealed;
  sealed.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) sealed.push_back(seal(params[i], derive_seed(stream_base, {i})));
  const auto total = open(sum(sealed));
  return finalize_average(total, params.size());
}

}  // namespace dyhfl::fl
