#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ionmem/pulses.hpp"
#include "oracles.hpp"

using namespace ionmem;

namespace {

const double kPi = oracle::kPi;

double sk1_pi_fidelity(double eps) {
  return transfer_fidelity(sequence_unitary(sk1_sequence(Pulse(kPi, 0.0)), eps), Pulse(kPi, 0.0), kGround);
}

double single_pi_fidelity(double eps) {
  return transfer_fidelity(sequence_unitary(PulseSequence({Pulse(kPi, 0.0)}), eps), Pulse(kPi, 0.0), kGround);
}

}  // namespace

TEST(RotationTest, MatchesPauliExponential) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> angle(0.0, 4.0 * kPi), phase(-kPi, kPi);
  for (int k = 0; k < 50; ++k) {
    const double theta = angle(rng), phi = phase(rng);
    const Unitary2 u = rotation_unitary(Pulse(theta, phi));
    EXPECT_LT((u.matrix() - oracle::rotation(theta, phi)).norm(), 1e-13);
    EXPECT_LT(u.unitarity_error(), 1e-12);
  }
}

TEST(RotationTest, TextbookCases) {
  EXPECT_LT((rotation_unitary(Pulse(0.0, 1.3)).matrix() - Eigen::Matrix2cd::Identity()).norm(), 1e-15);

  const QubitState flipped = rotation_unitary(Pulse(kPi, 0.0)) * kGround;
  EXPECT_NEAR(std::abs(flipped[0]), 0.0, 1e-15);
  EXPECT_NEAR(flipped[1].real(), 0.0, 1e-15);
  EXPECT_NEAR(flipped[1].imag(), -1.0, 1e-15);

  const QubitState half = rotation_unitary(Pulse(kPi / 2.0, 0.0)) * kGround;
  EXPECT_NEAR(half[0].real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(half[1].imag(), -1.0 / std::sqrt(2.0), 1e-15);
}

TEST(RotationTest, NegativeAngleFoldsIntoPhase) {
  const Pulse p(-kPi / 3.0, 0.2);
  EXPECT_DOUBLE_EQ(p.theta, kPi / 3.0);
  EXPECT_LT((rotation_unitary(p).matrix() - oracle::rotation(-kPi / 3.0, 0.2)).norm(), 1e-14);
}

TEST(Sk1Test, PhaseForPiPulse) {
  EXPECT_NEAR(sk1_phase(kPi), std::acos(-0.25), 1e-15);
  EXPECT_NEAR(sk1_phase(kPi), 1.8235, 1e-4);
  const auto seq = sk1_sequence(Pulse(kPi, 0.4));
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_DOUBLE_EQ(seq.pulses()[1].theta, 2.0 * kPi);
  EXPECT_NEAR(seq.pulses()[1].phi, 0.4 - sk1_phase(kPi), 1e-15);
  EXPECT_NEAR(seq.pulses()[2].phi, 0.4 + sk1_phase(kPi), 1e-15);
}

TEST(Sk1Test, UndefinedBeyondFourPi) {
  try {
    sk1_phase(4.0 * kPi + 1e-9);
    FAIL() << "expected domain_error";
  } catch (const std::domain_error& e) {
    EXPECT_STREQ(e.what(), "SK1 phase undefined");
  }
  EXPECT_NO_THROW(sk1_phase(4.0 * kPi));
}

TEST(Sk1Test, ExactAtZeroErrorForRandomTargets) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(1e-3, 4.0 * kPi), phase(-kPi, kPi);
  for (int k = 0; k < 100; ++k) {
    const Pulse target(angle(rng), phase(rng));
    const Unitary2 u = sequence_unitary(sk1_sequence(target), 0.0);
    EXPECT_NEAR(phase_insensitive_overlap(u, Unitary2(oracle::rotation(target.theta, target.phi))), 1.0, 1e-12);
    EXPECT_LT(u.unitarity_error(), 1e-12);
  }
}

TEST(Sk1Test, ProductOrderAndCommonError) {
  const Pulse target(kPi / 2.0, 0.3);
  const double eps = 0.13;
  const double phi1 = std::acos(-target.theta / (4.0 * kPi));
  const Eigen::Matrix2cd expected = oracle::rotation(2.0 * kPi * (1 + eps), 0.3 + phi1) *
                                    oracle::rotation(2.0 * kPi * (1 + eps), 0.3 - phi1) *
                                    oracle::rotation(target.theta * (1 + eps), 0.3);
  EXPECT_LT((sequence_unitary(sk1_sequence(target), eps).matrix() - expected).norm(), 1e-13);
}

TEST(Sk1Test, SecondOrderSuppression) {
  EXPECT_LE(1.0 - sk1_pi_fidelity(0.05), 1e-4);
  EXPECT_LE(1.0 - sk1_pi_fidelity(-0.05), 1e-4);
  EXPECT_NEAR(1.0 - single_pi_fidelity(0.05), std::pow(std::sin(kPi * 0.05 / 2.0), 2), 1e-14);
  EXPECT_GE(sk1_pi_fidelity(0.1), 0.999);
  EXPECT_GE(sk1_pi_fidelity(0.2), 0.99);
  EXPECT_GE(sk1_pi_fidelity(-0.2), 0.99);
}

TEST(FidelityTest, SinglePulseIsCosineSquared) {
  for (double eps = -0.5; eps <= 0.5; eps += 0.05) {
    EXPECT_NEAR(single_pi_fidelity(eps), std::pow(std::cos(kPi * eps / 2.0), 2), 1e-14);
    EXPECT_NEAR(single_pi_fidelity(eps), single_pi_fidelity(-eps), 1e-14);
  }
  EXPECT_NEAR(single_pi_fidelity(0.2), 0.9045, 1e-4);
}

TEST(FidelityTest, BoundsAndExtremes) {
  const Pulse target(kPi, 0.0);
  EXPECT_NEAR(transfer_fidelity(rotation_unitary(target), target, kGround), 1.0, 1e-15);
  EXPECT_NEAR(transfer_fidelity(Unitary2(), target, kGround), 0.0, 1e-15);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  for (int k = 0; k < 200; ++k) {
    const double f = transfer_fidelity(rotation_unitary(Pulse(angle(rng), angle(rng))), Pulse(angle(rng), angle(rng)),
                                       rotation_unitary(Pulse(angle(rng), angle(rng))) * kGround);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
}

TEST(FidelityTest, AverageGateFidelity) {
  const Unitary2 x = rotation_unitary(Pulse(kPi, 0.0));
  EXPECT_NEAR(average_gate_fidelity(x, x), 1.0, 1e-15);
  EXPECT_NEAR(average_gate_fidelity(Unitary2(), x), 1.0 / 3.0, 1e-15);
}

TEST(SequenceTest, RejectsEmptyAndBadError) {
  EXPECT_THROW(PulseSequence({}), std::invalid_argument);
  EXPECT_THROW(sequence_unitary(PulseSequence({Pulse(kPi, 0)}), -1.0), std::invalid_argument);
}

TEST(SweepTest, GridEndpointsAndPlateau) {
  const auto sweep = area_error_sweep(Pulse(kPi, 0.0), -0.3, 0.3, 0.01);
  ASSERT_EQ(sweep.size(), 61u);
  EXPECT_NEAR(sweep.front().epsilon, -0.3, 1e-15);
  EXPECT_NEAR(sweep.back().epsilon, 0.3, 1e-12);
  for (const auto& p : sweep) {
    EXPECT_GE(p.sk1_fidelity, p.single_pulse_fidelity - 1e-12);
    if (std::abs(p.epsilon) <= 0.2 + 1e-12) EXPECT_GE(p.sk1_fidelity, 0.99);
  }
}

TEST(RabiTest, PopulationAndProfile) {
  const RabiProfile flat(2.0 * kPi * 10.3e3, 0.0);
  EXPECT_EQ(rabi_population(flat, 0.0, 0.0), 0.0);
  EXPECT_NEAR(rabi_population(flat, 0.0, 1.0 / (2.0 * 10.3e3)), 1.0, 1e-15);

  const double g = rabi_gradient_from_endpoints(2.0 * kPi * 10.3e3, 2.0 * kPi * 7.4e3, 80.0);
  EXPECT_NEAR(g, -0.0041, 1e-4);
  const RabiProfile profile(2.0 * kPi * 10.3e3, g);
  EXPECT_NEAR(profile.omega_at(80.0), 2.0 * kPi * 7.4e3, 1e-9);
  EXPECT_NEAR(profile.omega_at(1.0) / profile.omega_at(0.0), 1.0 + g, 1e-15);

  EXPECT_THROW(RabiProfile(0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(RabiProfile(1.0, -1.0), std::invalid_argument);
  EXPECT_THROW(rabi_population(profile, 0.0, -1.0), std::invalid_argument);
}
