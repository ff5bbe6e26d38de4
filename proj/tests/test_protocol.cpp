#include <doctest.h>

#include <cmath>

#include "rangesim/protocol.hpp"

using namespace rangesim;

namespace {

ProtocolConfig small_config() {
  ProtocolConfig pc;
  pc.sequence_length = 512;
  pc.alpha = 50.0;
  pc.l0 = 256;
  pc.waiting_window = 1000;
  pc.batch_size = 10;
  pc.upsample_factor = 1;
  pc.tof_max = 1e-6;
  pc.epoch_duration = 1.0;
  return pc;
}

ChannelConfig channel_for(double snr_db, double ref_distance, double carrier = 2.45e9) {
  ChannelConfig cfg;
  cfg.carrier_hz = carrier;
  cfg.sample_rate_hz = 1e8;
  const double amp = free_space_amplitude(ref_distance, carrier);
  cfg.noise_power = amp * amp / std::pow(10.0, snr_db / 10.0);
  cfg.rng_seed = 42;
  return cfg;
}

InitiatorNode initiator_with(const ProtocolConfig& pc) {
  return InitiatorNode{0, Position{0, 0, 0}, NodeClock{}, SharedKey::from_string("protocol-test-key"),
                       pc};
}

std::vector<ReflectorNode> reflectors_at(std::initializer_list<double> distances) {
  std::vector<ReflectorNode> out;
  std::uint32_t id = 1;
  for (double d : distances) {
    ReflectorNode r;
    r.id = id++;
    r.position = Position{d, 0, 0};
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("check_epoch") {
  SUBCASE("plain floor") {
    NodeClock clock;
    CHECK(check_epoch(clock, 1.5, 1.0).value == 1);
  }
  SUBCASE("offset shifts the epoch") {
    NodeClock clock;
    clock.offset = 0.6;
    CHECK(check_epoch(clock, 0.5, 1.0).value == 1);
  }
  SUBCASE("typical drift stays below one epoch over hours") {
    NodeClock clock;
    clock.drift_ppm = 40.0;
    CHECK(check_epoch(clock, 10000.0, 1.0).value == 10000);
  }
}

TEST_CASE("resync_period") {
  CHECK(resync_period(1.0, 40.0) == doctest::Approx(12500.0));
  CHECK(resync_period(1.0, 80.0) == doctest::Approx(6250.0));
  CHECK(resync_period(0.1, 40.0) == doctest::Approx(1250.0));
  CHECK(std::isinf(resync_period(1.0, 0.0)));
  CHECK_THROWS_AS(resync_period(0.0, 40.0), std::invalid_argument);
}

TEST_CASE("run_sync") {
  ProtocolConfig pc = small_config();
  InitiatorNode initiator = initiator_with(pc);
  initiator.clock.processing_delay = 1e-6;

  SUBCASE("mismatch is eps_i + eps_r + tof, give or take quantization") {
    auto reflectors = reflectors_at({30.0});
    reflectors[0].clock.processing_delay = 1e-6;
    const auto outcomes = run_sync(initiator, reflectors, channel_for(30.0, 30.0), 7, 99);
    REQUIRE(outcomes.size() == 1);
    REQUIRE(outcomes[0].synced);
    const double expected = 1e-6 + 1e-6 + 30.0 / kSpeedOfLight;
    CHECK(outcomes[0].mismatch == doctest::Approx(expected).epsilon(0.02));
    CHECK(outcomes[0].mismatch < 0.01 * pc.epoch_duration);
    CHECK(reflectors[0].current_epoch == 7);
    CHECK(reflectors[0].synchronized);
  }
  SUBCASE("a receiver without the shared key cannot authenticate the frame") {
    const auto frame =
        build_sync_frame(initiator.key, 0, EpochIndex{7, 1.0}, postamble_sequence(), 1e-8);
    const auto payload = decode_sync_payload(
        std::span<const cplx>(frame.samples.data(), kSyncPayloadSymbols),
        SharedKey::from_string("some-other-key-entirely"), 7);
    CHECK_FALSE(payload.has_value());
  }
}

TEST_CASE("pair session end to end") {
  ProtocolConfig pc = small_config();
  InitiatorNode initiator = initiator_with(pc);
  auto reflectors = reflectors_at({10.0});
  const ChannelConfig ch = channel_for(20.0, 10.0);
  assume_synchronized(initiator, reflectors, 3);

  const SessionResult result = run_session(initiator, reflectors, ch, 3, 1234);
  REQUIRE(result.reflectors.size() == 1);
  const ReflectorReport& rep = result.reflectors[0];
  CHECK(rep.request_detected);
  REQUIRE_FALSE(rep.failed);
  CHECK(rep.n_responses_received >= 8);
  CHECK(rep.error < 0.25);
  CHECK(rep.estimate->batch_size_sent == 10);
  CHECK(rep.estimate->subset.size() == 5);

  SUBCASE("per-response tofs are within range and windows") {
    for (const ResponseRecord& rec : result.responses) {
      if (!rec.accepted) continue;
      CHECK(rec.tof >= 0.0);
      CHECK(rec.tof <= pc.tof_max);
      CHECK(std::abs(rec.distance - 10.0) < 0.5);
    }
  }
  SUBCASE("session fits its declared duration") {
    CHECK(result.session_duration < pc.epoch_duration);
    for (const ResponseRecord& rec : result.responses) {
      CHECK(rec.t_r < result.session_duration);
    }
  }
}

TEST_CASE("session without interpolation loses accuracy at fractional distances") {
  ProtocolConfig pc = small_config();
  const double T = 1e-8;
  // a distance whose two-way delay lands mid-sample
  const double d = (3.25 / 2.0) * kSpeedOfLight * T;
  InitiatorNode initiator = initiator_with(pc);
  auto reflectors = reflectors_at({d});
  const ChannelConfig ch = channel_for(25.0, d);

  assume_synchronized(initiator, reflectors, 5);
  const SessionResult with = run_session(initiator, reflectors, ch, 5, 99);

  initiator.config.subsample_interpolation = false;
  const SessionResult without = run_session(initiator, reflectors, ch, 5, 99);

  REQUIRE_FALSE(with.reflectors[0].failed);
  REQUIRE_FALSE(without.reflectors[0].failed);
  CHECK(with.reflectors[0].error < 0.25);
  CHECK(without.reflectors[0].error > with.reflectors[0].error);
  CHECK(without.reflectors[0].error > 0.3);
}

TEST_CASE("two equidistant reflectors both succeed") {
  ProtocolConfig pc = small_config();
  InitiatorNode initiator = initiator_with(pc);
  std::vector<ReflectorNode> reflectors(2);
  reflectors[0].id = 1;
  reflectors[0].position = Position{5.0, 0, 0};
  reflectors[1].id = 2;
  reflectors[1].position = Position{0, 5.0, 0};
  const ChannelConfig ch = channel_for(20.0, 5.0);
  assume_synchronized(initiator, reflectors, 11);

  const SessionResult result = run_session(initiator, reflectors, ch, 11, 777);
  REQUIRE(result.reflectors.size() == 2);
  for (const auto& rep : result.reflectors) {
    CHECK_FALSE(rep.failed);
    CHECK(rep.error < 0.4);
  }
}

TEST_CASE("hardware latency is compensated when configured") {
  ProtocolConfig pc = small_config();
  pc.t_hw = 200e-9;  // 20 samples
  InitiatorNode initiator = initiator_with(pc);
  auto reflectors = reflectors_at({12.0});
  const ChannelConfig ch = channel_for(25.0, 12.0);
  assume_synchronized(initiator, reflectors, 2);
  const SessionResult result = run_session(initiator, reflectors, ch, 2, 4321);
  REQUIRE_FALSE(result.reflectors[0].failed);
  CHECK(result.reflectors[0].error < 0.25);
}

TEST_CASE("unsynchronized reflectors stay silent") {
  ProtocolConfig pc = small_config();
  InitiatorNode initiator = initiator_with(pc);
  auto reflectors = reflectors_at({8.0, 9.0});
  const ChannelConfig ch = channel_for(20.0, 8.0);
  assume_synchronized(initiator, reflectors, 4);
  reflectors[1].synchronized = false;

  const SessionResult result = run_session(initiator, reflectors, ch, 4, 555);
  CHECK_FALSE(result.reflectors[0].failed);
  CHECK(result.reflectors[1].failed);
  CHECK(result.reflectors[1].n_responses_received == 0);
}

TEST_CASE("clock offsets below half an epoch never change the estimates") {
  ProtocolConfig pc = small_config();
  InitiatorNode initiator = initiator_with(pc);
  const ChannelConfig ch = channel_for(20.0, 10.0);

  auto run_with_offsets = [&](double o1, double o2) {
    std::vector<ReflectorNode> reflectors(2);
    reflectors[0].id = 1;
    reflectors[0].position = Position{10.0, 0, 0};
    reflectors[0].clock.offset = o1;
    reflectors[1].id = 2;
    reflectors[1].position = Position{0, 7.0, 0};
    reflectors[1].clock.offset = o2;
    assume_synchronized(initiator, reflectors, 9);
    return run_session(initiator, reflectors, ch, 9, 31337);
  };

  const SessionResult base = run_with_offsets(0.0, 0.0);
  const SessionResult shifted = run_with_offsets(0.31, -0.44);
  REQUIRE(base.reflectors.size() == shifted.reflectors.size());
  for (std::size_t k = 0; k < base.reflectors.size(); ++k) {
    REQUIRE_FALSE(base.reflectors[k].failed);
    REQUIRE_FALSE(shifted.reflectors[k].failed);
    CHECK(base.reflectors[k].estimate->final == shifted.reflectors[k].estimate->final);
  }
}

TEST_CASE("waiting chains agree between the two sides") {
  ProtocolConfig pc = small_config();
  pc.batch_size = 4;
  InitiatorNode initiator = initiator_with(pc);
  auto reflectors = reflectors_at({10.0});
  const ChannelConfig ch = channel_for(30.0, 10.0);
  assume_synchronized(initiator, reflectors, 6);

  const SessionSetup setup = prepare_session(initiator, reflectors, 6, ch);
  const auto activities = reflector_phase(setup, initiator, reflectors, ch, 88);
  REQUIRE(activities[0].request_detected);
  REQUIRE(activities[0].emissions.size() == 4);

  // the reflector's emission times reproduce the initiator-side chain exactly
  const double T = ch.sample_period();
  std::int64_t prev_end = activities[0].timer_origin;
  for (std::size_t n = 0; n < 4; ++n) {
    const std::int64_t expected_start =
        prev_end + 1 + static_cast<std::int64_t>(setup.waits[0][n].ticks);
    CHECK(activities[0].emissions[n].start_time ==
          doctest::Approx(static_cast<double>(expected_start) * T));
    prev_end = expected_start + static_cast<std::int64_t>(setup.response_length()) - 1;
  }
}

TEST_CASE("duplicate responses are dropped in favour of the earliest copy") {
  ProtocolConfig pc = small_config();
  pc.batch_size = 2;
  InitiatorNode initiator = initiator_with(pc);
  auto reflectors = reflectors_at({10.0});
  const ChannelConfig ch = channel_for(25.0, 10.0);
  assume_synchronized(initiator, reflectors, 8);

  const SessionSetup setup = prepare_session(initiator, reflectors, 8, ch);
  const auto activities = reflector_phase(setup, initiator, reflectors, ch, 77);
  REQUIRE(activities[0].request_detected);

  // replay response 0 a few samples later (inside the acceptance window)
  TimedEmission replay = activities[0].emissions.at(0);
  replay.start_time += 40.0 * ch.sample_period();
  replay.source = Position{10.0, 0.5, 0};
  const std::vector<TimedEmission> attack = {replay};

  const SessionResult result =
      initiator_phase(setup, initiator, reflectors, activities, ch, 77, attack);

  std::size_t accepted = 0, dropped = 0;
  double accepted_tr = 0.0, dropped_tr = 0.0;
  for (const ResponseRecord& rec : result.responses) {
    if (rec.response_index != 0) continue;
    if (rec.accepted) {
      ++accepted;
      accepted_tr = rec.t_r;
    }
    if (rec.duplicate_dropped) {
      ++dropped;
      dropped_tr = rec.t_r;
    }
  }
  CHECK(accepted == 1);
  CHECK(dropped == 1);
  CHECK(accepted_tr < dropped_tr);
  CHECK_FALSE(result.reflectors[0].failed);
  CHECK(result.reflectors[0].error < 0.4);
}
