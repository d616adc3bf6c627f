#include <bit>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <random>

#include <doctest.h>

#include "fixtures.hpp"
#include "mocomp/errors.hpp"
#include "mocomp/protocol.hpp"

using namespace mocomp;
using fixtures::field_exact;
using fixtures::same_bits;
using fixtures::wild;


TEST_SUITE("protocol") {
  TEST_CASE("command frame layout is canonical") {
    MetaCommand c;
    c.timestamp_ms = 0;
    c.mode_index = 1;
    c.movement_dir = {1.0, 0.0};
    c.facing_dir = {1.0, 0.0};
    c.speed = 1.0;
    c.pelvis_height = 0.74;
    CHECK(encode_command(c) ==
          "{\"t\":0,\"mode\":1,\"move\":[1.0,0.0],\"face\":[1.0,0.0],\"speed\":1.0,\"height\":0.74}\n");
  }

  TEST_CASE("telemetry frame layout is canonical") {
    TelemetrySample s;
    s.timestamp_ms = 40;
    s.mode_index = 2;
    s.base_pos = {0.5, -0.25, 0.72};
    s.heading_rad = 0.0;
    s.base_vel = {2.0, 0.0};
    s.pelvis_height = 0.72;
    s.gait_phase = 0.125;
    s.joints = {0.1, -0.2};
    CHECK(encode_telemetry(s) ==
          "{\"t\":40,\"mode\":2,\"pos\":[0.5,-0.25,0.72],\"heading\":0.0,\"vel\":[2.0,0.0],\"h\":0.72,"
          "\"phase\":0.125,\"joints\":[0.1,-0.2]}\n");
  }

  TEST_CASE("halt command round-trips") {
    MetaCommand halt;
    halt.timestamp_ms = 1234;
    halt.mode_index = 1;
    halt.movement_dir = {0.0, 0.0};
    halt.facing_dir = {0.0, 1.0};
    halt.speed = 0.0;
    const MetaCommand back = decode_command(encode_command(halt));
    CHECK(field_exact(back, halt));
  }

  TEST_CASE("command invariants") {
    MetaCommand c;
    c.mode_index = 25;
    CHECK_THROWS_AS(encode_command(c), InvalidCommand);
    CHECK_THROWS_AS(
        decode_command("{\"t\":0,\"mode\":25,\"move\":[0.0,0.0],\"face\":[1.0,0.0],\"speed\":0.0,\"height\":0.74}\n"),
        InvalidCommand);
    c.mode_index = 0;
    c.facing_dir = {0.5, 0.0};
    CHECK_THROWS_AS(encode_command(c), InvalidCommand);
    c.facing_dir = {1.0, 0.0};
    c.movement_dir = {0.5, 0.5};
    CHECK_THROWS_AS(encode_command(c), InvalidCommand);
    c.movement_dir = {0.0, 0.0};
    c.speed = -0.1;
    CHECK_THROWS_AS(encode_command(c), InvalidCommand);
    c.speed = 0.0;
    c.pelvis_height = 0.0;
    CHECK_THROWS_AS(encode_command(c), InvalidCommand);
    c.pelvis_height = 0.74;
    c.timestamp_ms = -1;
    CHECK_THROWS_AS(encode_command(c), InvalidCommand);
  }

  TEST_CASE("malformed frames") {
    const std::string good = "{\"t\":0,\"mode\":1,\"move\":[1.0,0.0],\"face\":[1.0,0.0],\"speed\":1.0,\"height\":0.74}\n";
    CHECK_NOTHROW(decode_command(good));
    CHECK_THROWS_AS(decode_command(good.substr(0, good.size() / 2)), MalformedFrame);
    CHECK_THROWS_AS(decode_command("[]\n"), MalformedFrame);
    CHECK_THROWS_AS(decode_command("{\"t\":0}\n"), MalformedFrame);
    CHECK_THROWS_AS(
        decode_command("{\"t\":0,\"mode\":1,\"move\":[1.0],\"face\":[1.0,0.0],\"speed\":1.0,\"height\":0.74}\n"),
        MalformedFrame);
    CHECK_THROWS_AS(
        decode_command("{\"t\":0.5,\"mode\":1,\"move\":[1.0,0.0],\"face\":[1.0,0.0],\"speed\":1.0,\"height\":0.74}\n"),
        MalformedFrame);
    CHECK_THROWS_AS(
        decode_command("{\"t\":0,\"mode\":1,\"move\":[1.0,0.0],\"face\":[1.0,0.0],\"speed\":\"x\",\"height\":0.74}\n"),
        MalformedFrame);
  }

  TEST_CASE("heading range is (-pi, pi]") {
    TelemetrySample s;
    s.heading_rad = std::numbers::pi;
    CHECK(field_exact(decode_telemetry(encode_telemetry(s)), s));
    s.heading_rad = -std::numbers::pi;
    CHECK_THROWS_AS(encode_telemetry(s), InvalidSample);
    s.heading_rad = 0.0;
    s.gait_phase = 1.0;
    CHECK_THROWS_AS(encode_telemetry(s), InvalidSample);
    s.gait_phase = 0.0;
    s.joints = {std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(encode_telemetry(s), InvalidSample);
  }

  TEST_CASE("format_double is shortest round-trip and always marked as float") {
    CHECK(format_double(1.0) == "1.0");
    CHECK(format_double(0.74) == "0.74");
    CHECK(format_double(-0.0) == "-0.0");
    CHECK(format_double(1e21) == "1e+21");
    std::mt19937_64 g(7);
    for (int i = 0; i < 2000; ++i) {
      const double v = wild(g);
      const std::string s = format_double(v);
      CHECK(s.find_first_of(".e") != std::string::npos);
      CHECK(same_bits(std::strtod(s.c_str(), nullptr), v));
    }
  }

  TEST_CASE("10k randomized commands and samples survive the wire field-exact") {
    std::mt19937_64 g(20240601);
    int failures = 0;
    for (int i = 0; i < 10000; ++i) {
      const MetaCommand c = fixtures::random_command(g);
      if (!field_exact(decode_command(encode_command(c)), c)) ++failures;
      const TelemetrySample s = fixtures::random_sample(g);
      if (!field_exact(decode_telemetry(encode_telemetry(s)), s)) ++failures;
    }
    CHECK(failures == 0);
  }

  TEST_CASE("frame splitter reassembles arbitrary chunking") {
    std::string stream;
    std::vector<std::string> frames;
    for (int i = 0; i < 20; ++i) {
      MetaCommand c;
      c.timestamp_ms = i * 50;
      frames.push_back(encode_command(c));
      stream += frames.back();
    }
    FrameSplitter sp;
    std::vector<std::string> got;
    std::mt19937 g(3);
    std::size_t pos = 0;
    while (pos < stream.size()) {
      const std::size_t n = std::min<std::size_t>(1 + g() % 40, stream.size() - pos);
      sp.feed(std::string_view(stream).substr(pos, n));
      pos += n;
      while (auto f = sp.next()) got.push_back(*f);
    }
    REQUIRE(got.size() == frames.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(decode_command(got[i]) == decode_command(frames[i]));
    CHECK_FALSE(sp.has_partial());
    sp.feed("{\"t\":");
    CHECK_FALSE(sp.next().has_value());
    CHECK(sp.has_partial());
  }

  TEST_CASE("ui events round-trip") {
    Recipe r;
    r.name = "demo";
    r.seed = 5;
    SegmentSpec s;
    s.mode = std::string("Walk");
    s.duration_s = 2.0;
    s.movement = Movement::Forward;
    r.segments.push_back(s);
    const std::vector<UiEvent> events = {KeyDown{Key::W},   KeyUp{Key::Comma}, SetMode{6},       SetSpeed{1.25},
                                         SetHeight{0.5},    DispatchRecipe{r}, Halt{},           KeyDown{Key::Period}};
    for (const auto& ev : events) {
      const UiEvent back = decode_ui_event(encode_ui_event(ev));
      CHECK(back.index() == ev.index());
      CHECK(encode_ui_event(back) == encode_ui_event(ev));
    }
    for (Key k : {Key::W, Key::A, Key::S, Key::D, Key::Q, Key::E, Key::Comma, Key::Period, Key::R}) {
      CHECK(parse_key(key_name(k)) == k);
    }
  }

  TEST_CASE("bad ui events") {
    CHECK_THROWS_AS(decode_ui_event("{\"type\":\"jump\"}"), InvalidEvent);
    CHECK_THROWS_AS(decode_ui_event("{\"type\":\"key_down\",\"key\":\"X\"}"), InvalidEvent);
    CHECK_THROWS_AS(decode_ui_event("{\"type\":\"set_speed\"}"), InvalidEvent);
    CHECK_THROWS_AS(decode_ui_event("not json"), InvalidEvent);
    CHECK_THROWS_AS(decode_ui_event("{\"type\":\"dispatch_recipe\",\"recipe\":{\"name\":1}}"), InvalidEvent);
  }
}
