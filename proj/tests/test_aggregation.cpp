#include <gtest/gtest.h>

#include <random>

#include "dyhfl/aggregation.hpp"

namespace fl = dyhfl::fl;
namespace he = dyhfl::he;

namespace {

const fl::SecureChannel& channel512() {
  static const fl::SecureChannel ch = fl::SecureChannel::paillier(512, 1);
  return ch;
}

std::vector<double> plain_mean(const std::vector<std::vector<double>>& vs) {
  std::vector<double> out(vs[0].size(), 0.0);
  for (const auto& v : vs)
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
  for (double& x : out) x /= static_cast<double>(vs.size());
  return out;
}

}  // namespace

TEST(SecureAggregate, ThreeAgentAverage) {
  const std::vector<std::vector<double>> models{{1, 2}, {3, 4}, {5, 6}};
  const auto avg = channel512().average(models, 9);
  EXPECT_NEAR(avg[0], 3.0, 1e-6);
  EXPECT_NEAR(avg[1], 4.0, 1e-6);
}

TEST(SecureAggregate, SingleAgentIsIdentity) {
  const std::vector<std::vector<double>> models{{0.25, -0.75, 1.5}};
  const auto avg = channel512().average(models, 2);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(avg[i], models[0][i], 1e-6);
}

TEST(SecureAggregate, MatchesPlaintextOracle) {
  const auto& ch = channel512();
  const double scale = 1e6;
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> models(4, std::vector<double>(50));
    for (auto& m : models)
      for (double& x : m) x = u(gen);
    const auto enc = ch.average(models, static_cast<std::uint64_t>(trial));
    const auto plain = fl::SecureChannel::plain().average(models, 0);
    const auto oracle = plain_mean(models);
    for (std::size_t i = 0; i < 50; ++i) {
      EXPECT_LE(std::abs(enc[i] - oracle[i]), 3 / (2 * scale));
      EXPECT_NEAR(plain[i], oracle[i], 1e-15);
    }
  }
}

TEST(SecureAggregate, ServerSideFoldAndErrors) {
  const auto& kp = *channel512().keys();
  const he::FixedPointCodec codec(kp.pub.n);
  he::RandomSource rng(4);
  const std::vector<double> a{1.5, -2.0}, b{0.5, 1.0};
  const std::vector<he::EncryptedVector> enc{he::encrypt_vector(kp.pub, codec, a, rng),
                                             he::encrypt_vector(kp.pub, codec, b, rng)};
  const auto sum = he::decrypt_vector(kp.priv, codec, fl::secure_aggregate(enc, kp.pub));
  EXPECT_NEAR(sum[0], 2.0, 1e-9);
  EXPECT_NEAR(sum[1], -1.0, 1e-9);
  const auto avg = fl::finalize_average(sum, 2);
  EXPECT_NEAR(avg[0], 1.0, 1e-9);

  EXPECT_THROW(fl::secure_aggregate(std::span<const he::EncryptedVector>{}, kp.pub), std::invalid_argument);
  const std::vector<he::EncryptedVector> ragged{enc[0], he::EncryptedVector(enc[1].begin(), enc[1].begin() + 1)};
  EXPECT_THROW(fl::secure_aggregate(ragged, kp.pub), std::invalid_argument);
  EXPECT_THROW(fl::finalize_average(sum, 0), std::invalid_argument);
}

TEST(SecureChannel, SealIsDeterministicPerStream) {
  const auto& ch = channel512();
  const std::vector<double> v{0.1, 0.2};
  const auto a = std::get<he::EncryptedVector>(ch.seal(v, 1));
  const auto b = std::get<he::EncryptedVector>(ch.seal(v, 1));
  const auto c = std::get<he::EncryptedVector>(ch.seal(v, 2));
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  EXPECT_EQ(ch.mode(), fl::Encryption::kPaillier);
  EXPECT_EQ(fl::SecureChannel::plain().mode(), fl::Encryption::kPlain);
}

TEST(Encryption, ParseNames) {
  EXPECT_EQ(fl::parse_encryption("plain"), fl::Encryption::kPlain);
  EXPECT_EQ(fl::to_string(fl::Encryption::kPaillier), "paillier");
  EXPECT_THROW(fl::parse_encryption("ckks"), std::invalid_argument);
}
