#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "liftlab/config.hpp"
#include "liftlab/io.hpp"
#include "liftlab/parallel.hpp"
#include "liftlab/rng.hpp"
#include "liftlab/stats.hpp"

using namespace liftlab;

TEST_CASE("philox known answers") {
  auto zero = philox4x32_10_block({0, 0, 0, 0}, {0, 0});
  CHECK(zero[0] == 0x6627e8d5u);
  CHECK(zero[1] == 0xe169c58du);
  CHECK(zero[2] == 0xbc57ac4cu);
  CHECK(zero[3] == 0x9b00dbd8u);

  auto ones = philox4x32_10_block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                  {0xffffffffu, 0xffffffffu});
  CHECK(ones[0] == 0x408f276du);
  CHECK(ones[1] == 0x41c83b0eu);
  CHECK(ones[2] == 0xa20bc7c6u);
  CHECK(ones[3] == 0x6d5451fdu);

  auto pi = philox4x32_10_block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                {0xa4093822u, 0x299f31d0u});
  CHECK(pi[0] == 0xd16cfe09u);
  CHECK(pi[1] == 0x94fdccebu);
  CHECK(pi[2] == 0x5001e420u);
  CHECK(pi[3] == 0x24126ea1u);
}

TEST_CASE("fnv1a known answers") {
  CHECK(fnv1a64(std::string_view{}) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64(std::string_view{"a"}) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64(std::string_view{"foobar"}) == 0x85944171f73967e8ull);
}

TEST_CASE("rng stream basics") {
  RngStream rng(42, 7);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform01();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t k = rng.uniform_index(13);
    CHECK(k < 13);
  }
  for (int i = 0; i < 100; ++i) CHECK(rng.exponential() > 0.0);

  RngStream a(42, 0), b(42, 1);
  CHECK(a.next_u64() != b.next_u64());
  RngStream c(42, 0);
  c.next_u64();
  RngStream d(42, 0);
  d.next_u64();
  CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("rng moments") {
  RngStream rng(5, 0);
  int n = 200000;
  double sn = 0.0, sn2 = 0.0, se = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    sn += z;
    sn2 += z * z;
    se += rng.exponential(2.0);
  }
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(std::abs(sn2 / n - 1.0) < 0.02);
  CHECK(std::abs(se / n - 0.5) < 0.005);
}

TEST_CASE("uniform index is unbiased over cells") {
  RngStream rng(9, 3);
  std::vector<std::uint64_t> counts(8, 0);
  int draws = 80000;
  for (int i = 0; i < draws; ++i) ++counts[rng.uniform_index(8)];
  double stat = chi2_uniform_statistic(counts);
  CHECK(stat < chi2_quantile_95(7));
}

TEST_CASE("config round trip and diagnostics") {
  std::string text =
      "# comment\n"
      "[run]\n"
      "seed = 12\n"
      "horizon = 2.5\n"
      "\n"
      "[model]\n"
      "n = 16\n";
  ConfigMap cfg = parse_config_text(text, "demo.cfg");
  CHECK(cfg.at("run").at("seed").value == "12");
  CHECK(cfg.at("run").at("seed").line == 3);
  CHECK(cfg.at("model").at("n").value == "16");

  std::string once = serialize_config(cfg);
  std::string twice = serialize_config(parse_config_text(once, "round"));
  CHECK(once == twice);

  CHECK_THROWS_AS(parse_config_text("key = 1\n", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[s]\nk = 1\nk = 2\n", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[s\n", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[s]\n= v\n", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[s]\nnovalue\n", "x"), ConfigError);

  try {
    parse_config_text("[s]\nk = 1\nk = 2\n", "dup.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("dup.cfg:3") != std::string::npos);
  }

  CHECK(parse_int64("-7", "w") == -7);
  CHECK(parse_uint64("7", "w") == 7u);
  CHECK(parse_real("2.5", "w") == 2.5);
  CHECK(parse_bool("true", "w"));
  CHECK_FALSE(parse_bool("false", "w"));
  CHECK_THROWS_AS(parse_int64("12x", "w"), ConfigError);
  CHECK_THROWS_AS(parse_real("", "w"), ConfigError);
  CHECK(parse_int_list("4, 8,16", "w") == std::vector<int>{4, 8, 16});
  CHECK(join_ints({4, 8, 16}) == "4,8,16");
}

TEST_CASE("format_double round trips") {
  for (double v : {0.0, 1.0, -1.5, 0.1, 3.141592653589793, 1e-12, 6.02e23,
                   0.004757529218044579}) {
    std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("csv quoting") {
  CHECK(csv_quote("plain") == "plain");
  CHECK(csv_quote("a,b") == "\"a,b\"");
  CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_quote("line\nbreak") == "\"line\nbreak\"");

  CsvWriter w({"a", "b"});
  w.append_row({"1", "x,y"});
  CHECK(w.text() == "a,b\n1,\"x,y\"\n");
}

TEST_CASE("event log round trip") {
  std::vector<EventRecord> events = {
      {0.5, EventKind::JumpRight, 3},
      {1.25, EventKind::JumpLeft, 2},
      {2.0, EventKind::Refresh, 7},
  };
  std::string bytes = encode_event_log(16, events);
  CHECK(bytes.size() == 24 + events.size() * 13);
  EventLog log = decode_event_log(bytes);
  CHECK(log.n == 16);
  REQUIRE(log.events.size() == 3);
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(log.events[i].time == events[i].time);
    CHECK(log.events[i].kind == events[i].kind);
    CHECK(log.events[i].new_position == events[i].new_position);
  }

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS(decode_event_log(bad));
  CHECK_THROWS(decode_event_log(bytes.substr(0, bytes.size() - 1)));
  std::string vbad = bytes;
  vbad[8] = 2;
  CHECK_THROWS(decode_event_log(vbad));
}

TEST_CASE("atomic write and digest") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "liftlab_core_test";
  fs::create_directories(dir);
  fs::path p = dir / "blob.txt";
  atomic_write_file(p, "hello world");
  CHECK(read_file(p) == "hello world");
  CHECK(digest_file(p) == digest_bytes("hello world"));
  CHECK(digest_hex(digest_bytes("")) == "cbf29ce484222325");
  fs::remove_all(dir);
}

TEST_CASE("mean_var and batch means") {
  std::vector<double> xs = {1, 2, 3, 4, 5, 6, 7, 8};
  MeanVar mv = mean_var(xs);
  CHECK(mv.mean == Catch::Approx(4.5));
  CHECK(mv.var == Catch::Approx(6.0));  // unbiased sample variance

  CHECK(batch_means_stderr(xs, 4) > 0.0);
  CHECK_THROWS(batch_means_stderr(xs, 1));
}

TEST_CASE("fft autocovariance matches direct sum") {
  RngStream rng(31, 0);
  std::vector<double> x(300);
  double prev = 0.0;
  for (double& v : x) {
    prev = 0.7 * prev + rng.normal();
    v = prev;
  }
  auto c = autocovariance_fft(x, 20);
  REQUIRE(c.size() == 21);
  for (std::size_t k = 0; k <= 20; ++k) {
    double direct = 0.0;
    for (std::size_t i = 0; i + k < x.size(); ++i) direct += x[i] * x[i + k];
    direct /= static_cast<double>(x.size() - k);
    CHECK(c[k] == Catch::Approx(direct).margin(1e-9));
  }
}

TEST_CASE("fft rejects non power of two") {
  std::vector<std::complex<double>> a(6);
  CHECK_THROWS(fft_radix2(a, false));
}

TEST_CASE("weighted least squares recovers an exact line") {
  std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y, w(5, 2.0);
  for (double xi : x) y.push_back(3.0 - 0.5 * xi);
  LinearFit fit = wls_fit(x, y, w);
  CHECK(fit.slope == Catch::Approx(-0.5).margin(1e-12));
  CHECK(fit.intercept == Catch::Approx(3.0).margin(1e-12));
  CHECK(fit.chi2 == Catch::Approx(0.0).margin(1e-18));
  CHECK(fit.points == 5);

  std::vector<double> xs_same = {1, 1, 1};
  std::vector<double> ys = {1, 2, 3}, ws = {1, 1, 1};
  CHECK_THROWS(wls_fit(xs_same, ys, ws));
}

TEST_CASE("ks statistic on exact uniform grid") {
  std::vector<double> u;
  int n = 100;
  for (int i = 0; i < n; ++i) u.push_back((i + 0.5) / n);
  double d = ks_statistic(u, [](double t) { return t; });
  CHECK(d == Catch::Approx(0.005).margin(1e-12));
  CHECK(ks_critical_5pct(100) == Catch::Approx(0.13581));
}

TEST_CASE("local maxima of magnitude") {
  std::vector<double> v = {0.1, -0.9, 0.3, 0.2, -0.5, 0.4, 0.1};
  auto idx = local_maxima_abs(v);
  CHECK(idx == std::vector<std::size_t>{1, 4});
}

TEST_CASE("parallel_for is deterministic and rethrows") {
  std::vector<int> out(64, 0);
  parallel_for(64, 4, [&](std::uint64_t i) { out[i] = static_cast<int>(i * i); });
  for (int i = 0; i < 64; ++i) CHECK(out[i] == i * i);

  CHECK_THROWS_AS(parallel_for(8, 2,
                               [&](std::uint64_t i) {
                                 if (i == 5) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
