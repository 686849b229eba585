#include <doctest.h>

#include <chrono>
#include <cstring>
#include <map>
#include <cmath>
#include <httplib.h>
#include <random>
#include <thread>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/textio.hpp"
#include "iohfuse/dataio/external.hpp"
#include "iohfuse/dataio/preprocess.hpp"
#include "iohfuse/dataio/store.hpp"
#include "iohfuse/dataio/synth.hpp"
#include "tempdir.hpp"

using namespace iohfuse;
using namespace iohfuse::dataio;
using iohfuse::testing::TempDir;

namespace {

MapSeries series_of(std::vector<double> v, double interval = 10.0) {
  MapSeries s;
  s.patient_id = "p";
  s.sampling_interval_s = interval;
  s.missing_mask.assign(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) s.missing_mask[i] = 1;
  }
  s.values = std::move(v);
  return s;
}

const double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("compute_map") {
  CHECK(compute_map(120, 80) == doctest::Approx(280.0 / 3.0).epsilon(1e-15));
  CHECK(compute_map(65, 65) == 65.0);
  CHECK(compute_map(100, 55) == 70.0);
  CHECK_THROWS_AS(compute_map(70, 80), std::domain_error);
  CHECK_THROWS_AS(compute_map(80, 0), std::domain_error);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.0, 250.0);
  for (int i = 0; i < 1000; ++i) {
    double a = u(rng), b = u(rng);
    if (a < b) std::swap(a, b);
    const double m = compute_map(a, b);
    CHECK(m >= b);
    CHECK(m <= a);
  }
}

TEST_CASE("resample_map bins by mean and flags empty bins") {
  std::vector<TimedValue> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({static_cast<double>(i), 80.0});
  auto s = resample_map(pts, 6.0);
  REQUIRE(s.size() == 2);
  CHECK(s.values[0] == 80.0);
  CHECK(s.values[1] == 80.0);

  auto s2 = resample_map(std::vector<TimedValue>{{0, 60}, {1, 66}, {6, 90}, {7, 70}}, 6.0);
  REQUIRE(s2.size() == 2);
  CHECK(s2.values[0] == (60.0 + 66.0) / 2.0);
  CHECK(s2.values[1] == (90.0 + 70.0) / 2.0);

  auto s3 = resample_map(std::vector<TimedValue>{{0, 80}, {13, 82}}, 6.0);
  REQUIRE(s3.size() == 3);
  CHECK(s3.missing_mask[1] == 1);
  CHECK(std::isnan(s3.values[1]));
  CHECK(s3.missing_mask[0] == 0);

  CHECK_THROWS(resample_map(std::vector<TimedValue>{}, 6.0));
  CHECK_THROWS(resample_map(std::vector<TimedValue>{{5, 80}, {1, 80}}, 6.0));
}

TEST_CASE("resample_map of constant series is constant at any interval") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> gap(0.1, 3.0);
  for (double interval : {3.0, 6.0, 10.0, 7.5}) {
    std::vector<TimedValue> pts;
    double t = 0.0;
    for (int i = 0; i < 200; ++i) {
      pts.push_back({t, 71.25});
      t += gap(rng);
    }
    auto s = resample_map(pts, interval);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s.missing_mask[i]) CHECK(s.values[i] == doctest::Approx(71.25).epsilon(1e-15));
    }
  }
}

TEST_CASE("quality_filter thresholds") {
  auto mk = [](std::size_t n, std::size_t missing) {
    std::vector<double> v(n, 80.0);
    for (std::size_t i = 0; i < missing; ++i) v[i] = kNaN;
    return series_of(v, 1.0);
  };
  auto d = quality_filter(mk(999, 0));
  CHECK_FALSE(d.accepted);
  CHECK(to_string(d.reason) == "short");
  d = quality_filter(mk(1200, 300));
  CHECK_FALSE(d.accepted);
  CHECK(to_string(d.reason) == "missing");
  d = quality_filter(mk(1200, 0));
  CHECK(d.accepted);
  CHECK(quality_filter(mk(1000, 200)).accepted);
  CHECK_FALSE(quality_filter(mk(1000, 201)).accepted);
}

TEST_CASE("impute_missing interpolates and edge-fills") {
  auto a = impute_missing(series_of({80, kNaN, 84}));
  CHECK(a.values == std::vector<double>{80, 82, 84});
  CHECK(a.missing_mask[1] == 1);
  auto b = impute_missing(series_of({kNaN, 70, 70}));
  CHECK(b.values == std::vector<double>{70, 70, 70});
  auto c = impute_missing(series_of({75, kNaN, kNaN, 81}));
  for (std::size_t i = 0; i < 4; ++i) CHECK(c.values[i] == doctest::Approx(75.0 + 2.0 * i).epsilon(1e-15));
  auto e = impute_missing(series_of({64, kNaN, kNaN}));
  CHECK(e.values == std::vector<double>{64, 64, 64});
  CHECK_THROWS(impute_missing(series_of({kNaN, kNaN})));
}

TEST_CASE("synth_cohort is deterministic and honours the planted log") {
  SynthConfig cfg;
  cfg.n_patients = 40;
  auto a = synth_cohort(cfg, 5);
  auto b = synth_cohort(cfg, 5);
  REQUIRE(a.series.size() == 40);
  for (std::size_t i = 0; i < a.series.size(); ++i) {
    CHECK(a.patients[i] == b.patients[i]);
    CHECK(std::memcmp(a.series[i].values.data(), b.series[i].values.data(), a.series[i].values.size() * 8) == 0);
  }
  CHECK(a.episodes.size() == b.episodes.size());
  auto c = synth_cohort(cfg, 6);
  CHECK(c.series[0].values != a.series[0].values);

  CHECK(a.episodes.size() == 40);
  std::map<std::string, const MapSeries*> by_id;
  for (const auto& s : a.series) by_id[s.patient_id] = &s;
  for (const auto& e : a.episodes) {
    const auto& v = by_id.at(e.patient_id)->values;
    const double dur = static_cast<double>(e.span.end_index - e.span.start_index + 1) * cfg.sampling_interval_s;
    CHECK(dur >= 60.0);
    for (std::size_t i = e.span.start_index; i <= e.span.end_index; ++i) CHECK(v[i] < 64.0);
    CHECK(v[e.span.start_index - 1] >= 65.0);
    if (e.span.end_index + 1 < v.size()) CHECK(v[e.span.end_index + 1] >= 65.0);
  }

  SynthConfig none = cfg;
  none.ioh_rate = 0.0;
  auto z = synth_cohort(none, 5);
  CHECK(z.episodes.empty());
  for (const auto& s : z.series)
    for (double x : s.values) CHECK(x >= 66.0);

  SynthConfig bad = cfg;
  bad.min_episode_s = 30.0;
  bad.n_patients = 0;
  try {
    synth_cohort(bad, 1);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.violations().size() == 2);
  }
}

TEST_CASE("store/load round trip and schema errors") {
  TempDir dir;
  SynthConfig cfg;
  cfg.n_patients = 12;
  cfg.missing_rate = 0.05;
  auto syn = synth_cohort(cfg, 9);
  Cohort co{syn.patients, syn.series};
  co.series[3].sampling_interval_s = 6.0;
  co.series[3].start_offset_s = 12.5;
  store_cohort(dir.path(), co);
  auto back = load_cohort(dir.path());
  REQUIRE(back.patients == co.patients);
  REQUIRE(back.series.size() == co.series.size());
  for (std::size_t i = 0; i < co.series.size(); ++i) {
    const auto& x = co.series[i];
    const auto& y = back.series[i];
    CHECK(y.patient_id == x.patient_id);
    CHECK(y.sampling_interval_s == x.sampling_interval_s);
    CHECK(y.start_offset_s == x.start_offset_s);
    CHECK(y.missing_mask == x.missing_mask);
    for (std::size_t t = 0; t < x.size(); ++t) {
      if (x.missing_mask[t]) {
        CHECK(std::isnan(y.values[t]));
      } else {
        CHECK(std::abs(y.values[t] - x.values[t]) <= 1e-5);
      }
    }
  }

  write_text(dir.path() / kSeriesFile, "patient_id,index,missing\nP00001,0,0\n");
  try {
    load_cohort(dir.path());
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("'value'") != std::string::npos);
    CHECK(e.line() == 1);
  }
  write_text(dir.path() / kSeriesFile, "patient_id,index,value,missing\nP00001,0,80,0\nP00001,1,abc,0\n");
  try {
    load_cohort(dir.path());
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("store/load of 1000 patients is fast") {
  TempDir dir;
  SynthConfig cfg;
  cfg.n_patients = 1000;
  auto syn = synth_cohort(cfg, 2);
  Cohort co{syn.patients, syn.series};
  const auto t0 = std::chrono::steady_clock::now();
  store_cohort(dir.path(), co);
  auto back = load_cohort(dir.path());
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(back.series.size() == 1000);
  CHECK(sec < 10.0);
}

TEST_CASE("external client: cache, errors, ordering") {
  httplib::Server server;
  int hits = 0;
  server.Get(R"(/cases/([^/]+)/tracks/(.+))", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const std::string c = req.matches[1];
    if (c == "good") {
      res.set_content("[[3, 70.5], [1, 80], {\"time\": 2, \"value\": 75}, [4, null]]", "application/json");
    } else if (c == "broken") {
      res.set_content("{not json", "application/json");
    } else if (c == "flaky") {
      res.status = 503;
    } else {
      res.status = 404;
    }
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  struct Stopper {
    httplib::Server& s;
    std::thread& t;
    ~Stopper() {
      s.stop();
      if (t.joinable()) t.join();
    }
  } stopper{server, th};
  server.wait_until_ready();

  TempDir cache;
  ExternalClientConfig cfg;
  cfg.url_template = "http://127.0.0.1:" + std::to_string(port) + "/cases/{case_id}/tracks/{track}";
  cfg.cache_dir = cache.path();
  ExternalClient client(cfg, make_http_transport(5.0));

  auto s = client.fetch("good", "Solar8000/ART_MBP");
  REQUIRE(s.size() == 3);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i - 1].time_s <= s[i].time_s);
  CHECK(s[0].value == 80.0);
  CHECK(client.network_calls() == 1);
  auto s2 = client.fetch("good", "Solar8000/ART_MBP");
  CHECK(s2 == s);
  CHECK(client.network_calls() == 1);
  CHECK(hits == 1);

  CHECK_THROWS_AS(client.fetch("nobody", "x"), NotFoundError);
  CHECK_THROWS_AS(client.fetch("broken", "x"), ParseError);
  CHECK_THROWS_AS(client.fetch("flaky", "x"), RetryableError);
  CHECK_FALSE(std::filesystem::exists(client.cache_path("broken", "x")));
  server.stop();
  th.join();

  ExternalClientConfig dead = cfg;
  dead.cache_dir = cache.path() / "other";
  ExternalClient offline(dead, make_http_transport(1.0));
  CHECK_THROWS_AS(offline.fetch("good", "x"), RetryableError);
}
