// Copyright (c) 2026 The cxrformer Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>

#include "cxr/ensemble.hpp"
#include "cxr/error.hpp"
#include "cxr/io.hpp"
#include "cxr/rng.hpp"
#include "doctest.h"

using namespace cxr;
namespace fs = std::filesystem;

namespace {

ClassProbs random_probs(Rng& rng) {
  ClassProbs p;
  double total = 0;
  for (auto& x : p) total += (x = rng.uniform(0.01, 1.0));
  for (auto& x : p) x /= total;
  return p;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cxr_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("class names and indices") {
  CHECK(class_index("COVID-19") == 0);
  CHECK(class_index("Normal") == 1);
  CHECK(class_index("Pneumonia") == 2);
  CHECK(class_name(2) == "Pneumonia");
  CHECK_THROWS_AS(class_index("normal"), DataError);
}

TEST_CASE("classify examples") {
  CHECK(classify({1, 0, 0}) == 0);
  CHECK(classify({1.0 / 3, 1.0 / 3, 1.0 / 3}) == 0);
  CHECK(classify({0.2, 0.4, 0.4}) == 1);
  CHECK(classify({0.1, 0.2, 0.7}) == 2);
}

TEST_CASE("weighted_average examples") {
  const ClassProbs p1{0.6, 0.3, 0.1}, p2{0.2, 0.5, 0.3};
  SUBCASE("identical members are a fixed point") {
    const auto out = weighted_average({p1, p1, p1}, {0.3, 2.0, 7.5});
    for (int k = 0; k < 3; ++k) CHECK(out[k] == doctest::Approx(p1[k]).epsilon(1e-15));
  }
  SUBCASE("2:1 weighting") {
    const auto out = weighted_average({p1, p2}, {2, 1});
    CHECK(std::round(out[0] * 1e4) / 1e4 == 0.4667);
    CHECK(std::round(out[1] * 1e4) / 1e4 == 0.3667);
    CHECK(std::round(out[2] * 1e4) / 1e4 == 0.1667);
    CHECK(out[0] == doctest::Approx(1.4 / 3).epsilon(1e-15));
  }
  SUBCASE("a vanishing weight selects the other member") {
    const auto out = weighted_average({p1, p2}, {1, 1e-12});
    for (int k = 0; k < 3; ++k) CHECK(std::abs(out[k] - p1[k]) < 1e-11);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(weighted_average({p1, p2}, {1, 0}), ConfigError);
    CHECK_THROWS_AS(weighted_average({p1, p2}, {1}), ConfigError);
    CHECK_THROWS_AS(weighted_average({p1}, {-1}), ConfigError);
  }
}

TEST_CASE("weighted_average properties on random members") {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 4));
    std::vector<ClassProbs> members;
    std::vector<double> w;
    for (std::size_t i = 0; i < m; ++i) {
      members.push_back(random_probs(rng));
      w.push_back(rng.uniform(0.1, 5.0));
    }
    const auto out = weighted_average(members, w);
    CHECK(std::abs(out[0] + out[1] + out[2] - 1.0) < 1e-6);
    auto scaled = w;
    const double c = rng.uniform(0.01, 100.0);
    for (auto& x : scaled) x *= c;
    CHECK(classify(weighted_average(members, scaled)) == classify(out));
    // Power-of-two scaling and equal weights are exact.
    auto doubled = w;
    for (auto& x : doubled) x *= 2;
    CHECK(weighted_average(members, doubled) == out);
    CHECK(weighted_average(members, std::vector<double>(m, 3.7)) == weighted_average(members, std::vector<double>(m, 1.0)));
  }
}

TEST_CASE("single member with weight 1 preserves records bit-for-bit") {
  Rng rng(2);
  std::vector<PredictionRecord> recs;
  for (int i = 0; i < 50; ++i) {
    PredictionRecord r{"img" + std::to_string(i), random_probs(rng), 0};
    r.pred_label = classify(r.probs);
    recs.push_back(r);
  }
  CHECK(ensemble_records({recs}, {1.0}) == recs);
}

TEST_CASE("ensemble_records matches members by id and reports mismatches") {
  const std::vector<PredictionRecord> a{{"x", {0.6, 0.3, 0.1}, 0}, {"y", {0.1, 0.1, 0.8}, 2}};
  const std::vector<PredictionRecord> b{{"y", {0.2, 0.2, 0.6}, 2}, {"x", {0.2, 0.5, 0.3}, 1}};
  const auto out = ensemble_records({a, b}, {2, 1});
  REQUIRE(out.size() == 2);
  CHECK(out[0].image_id == "x");
  CHECK(out[0].pred_label == 0);
  CHECK(out[1].probs[2] == doctest::Approx((2 * 0.8 + 0.6) / 3).epsilon(1e-15));

  const std::vector<PredictionRecord> c{{"x", {0.2, 0.5, 0.3}, 1}, {"z", {0.2, 0.5, 0.3}, 1}};
  try {
    ensemble_records({a, c}, {1, 1});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("y") != std::string::npos);
    CHECK(msg.find("z") != std::string::npos);
    CHECK(msg.find("2 ids differ") != std::string::npos);
  }
}

TEST_CASE("parse_weights") {
  CHECK(parse_weights("2,1") == std::vector<double>{2, 1});
  CHECK(parse_weights("2:1") == std::vector<double>{2, 1});
  CHECK(parse_weights("0.5") == std::vector<double>{0.5});
  CHECK(weights_label({2, 1}) == "2:1");
  CHECK(weights_label({1.5, 1}) == "1.5:1");
  CHECK_THROWS_AS(parse_weights("2,"), ConfigError);
  CHECK_THROWS_AS(parse_weights("a"), ConfigError);
  CHECK_THROWS_AS(parse_weights("1,0"), ConfigError);
}

TEST_CASE("confusion_matrix examples") {
  const auto perfect = confusion_matrix({0, 1, 2, 2}, {0, 1, 2, 2});
  CHECK(perfect.counts == std::vector<std::int64_t>{1, 0, 0, 0, 1, 0, 0, 0, 2});
  const auto cm = confusion_matrix({0, 2, 2}, {0, 1, 2});
  CHECK(cm.counts == std::vector<std::int64_t>{1, 0, 0, 0, 0, 1, 0, 0, 1});
  CHECK(cm.total() == 3);
  CHECK_THROWS_AS(confusion_matrix({0, 1}, {0}), DataError);
  CHECK_THROWS_AS(confusion_matrix({3}, {0}), DataError);
}

TEST_CASE("metric_report examples") {
  SUBCASE("diagonal") {
    ConfusionMatrix cm;
    cm.at(0, 0) = 4;
    cm.at(1, 1) = 2;
    cm.at(2, 2) = 9;
    const auto r = metric_report(cm);
    CHECK(r.accuracy == 1.0);
    for (const auto& m : r.per_class) {
      CHECK(*m.sensitivity == 1.0);
      CHECK(*m.specificity == 1.0);
    }
    CHECK(*r.macro_sensitivity == 1.0);
    CHECK(*r.macro_specificity == 1.0);
    CHECK(*r.micro_sensitivity == 1.0);
    CHECK(*r.micro_specificity == 1.0);
    CHECK(r.flags.empty());
  }
  SUBCASE("hand-evaluated three-class example") {
    const auto r = metric_report(confusion_matrix({0, 2, 2}, {0, 1, 2}));
    CHECK(r.accuracy == 2.0 / 3.0);
    CHECK(*r.macro_sensitivity == (1.0 + 0.0 + 1.0) / 3.0);
    CHECK(*r.per_class[2].specificity == 0.5);
    CHECK(r.per_class[2].tn == 1);
    CHECK(r.per_class[2].fp == 1);
    CHECK(*r.per_class[0].specificity == 1.0);
    CHECK(*r.per_class[1].specificity == 1.0);
    CHECK(*r.micro_sensitivity == r.accuracy);
    CHECK(*r.micro_specificity == doctest::Approx((1.0 + 1.0 + 0.5) / 3.0).epsilon(1e-15));
  }
  SUBCASE("a class without samples is flagged and skipped") {
    const auto r = metric_report(confusion_matrix({0, 0, 2}, {0, 0, 2}));
    CHECK(!r.per_class[1].sensitivity.has_value());
    CHECK(*r.macro_sensitivity == 1.0);
    REQUIRE(r.flags.size() == 1);
    CHECK(r.flags[0].find("Normal") != std::string::npos);
    const auto j = to_json(r);
    CHECK(j["per_class"][1]["sensitivity"].is_null());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(metric_report(ConfusionMatrix{}), DataError);
    ConfusionMatrix neg;
    neg.at(0, 1) = -1;
    CHECK_THROWS_AS(metric_report(neg), DataError);
  }
}

TEST_CASE("metric identities on random confusion matrices") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 200));
    std::vector<int> preds, labels;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(static_cast<int>(rng.uniform_int(0, 2)));
      preds.push_back(rng.bernoulli(0.7) ? labels.back() : static_cast<int>(rng.uniform_int(0, 2)));
    }
    const auto cm = confusion_matrix(preds, labels);
    const auto r = metric_report(cm);
    REQUIRE(cm.total() == static_cast<std::int64_t>(n));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += preds[i] == labels[i];
    REQUIRE(r.accuracy == static_cast<double>(hits) / static_cast<double>(n));
    REQUIRE(*r.micro_sensitivity == r.accuracy);
    for (int c = 0; c < 3; ++c) {
      std::int64_t row = 0;
      for (int j = 0; j < 3; ++j) row += cm.at(c, j);
      REQUIRE(row == r.per_class[c].support);
      const auto& m = r.per_class[c];
      REQUIRE(m.tp + m.fp + m.fn + m.tn == static_cast<std::int64_t>(n));
    }
  }
}

TEST_CASE("prediction CSV round trip") {
  Rng rng(4);
  std::vector<PredictionRecord> recs;
  for (int i = 0; i < 20; ++i) {
    PredictionRecord r{"dir/img " + std::to_string(i) + ".pgm", random_probs(rng), 0};
    r.pred_label = classify(r.probs);
    recs.push_back(r);
  }
  recs[3].image_id = "with,comma.pgm";
  const auto dir = scratch_dir("pred_csv");
  write_predictions(dir / "p.csv", recs);
  CHECK(read_predictions(dir / "p.csv") == recs);
  const auto text = read_file_text(dir / "p.csv");
  CHECK(text.rfind("image_id,p_covid19,p_normal,p_pneumonia,pred_label\n", 0) == 0);

  write_file_atomic(dir / "bad.csv", std::string("image_id,p_covid19,p_normal,p_pneumonia,pred_label\na,0.5,0.5,0.5,Normal\n"));
  CHECK_THROWS_AS(read_predictions(dir / "bad.csv"), DataError);
  write_file_atomic(dir / "dup.csv", std::string("image_id,p_covid19,p_normal,p_pneumonia,pred_label\na,1,0,0,COVID-19\na,1,0,0,COVID-19\n"));
  CHECK_THROWS_AS(read_predictions(dir / "dup.csv"), DataError);
  write_file_atomic(dir / "hdr.csv", std::string("id,a,b,c,d\n"));
  CHECK_THROWS_AS(read_predictions(dir / "hdr.csv"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("ensemble_sweep") {
  // Member A is right on the disputed items, B on none of them; both agree elsewhere.
  std::vector<PredictionRecord> a, b;
  std::map<std::string, int> truth;
  for (int i = 0; i < 30; ++i) {
    const std::string id = "s" + std::to_string(i);
    const int label = i % 3;
    truth[id] = label;
    ClassProbs pa{0.1, 0.1, 0.1}, pb{0.1, 0.1, 0.1};
    if (i < 10) {
      pa[label] = 0.6;
      pa[(label + 1) % 3] = 0.3;
      pb[label] = 0.2;
      pb[(label + 1) % 3] = 0.7;
      pa[(label + 2) % 3] = 0.1;
      pb[(label + 2) % 3] = 0.1;
    } else {
      pa[label] = pb[label] = 0.8;
    }
    a.push_back({id, pa, classify(pa)});
    b.push_back({id, pb, classify(pb)});
  }
  const auto rows = ensemble_sweep({{"Swin", a}, {"TNT", b}}, {{1, 1}, {2, 1}, {3, 3}}, truth);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].weights == "/");
  CHECK(rows[0].report.accuracy == 1.0);
  CHECK(rows[1].report.accuracy == 20.0 / 30.0);
  CHECK(rows[0].report.matrix.counts == evaluate_records(a, truth).matrix.counts);
  CHECK(rows[2].models == "Swin, TNT");
  CHECK(rows[3].weights == "2:1");
  CHECK(rows[3].report.accuracy >= rows[2].report.accuracy);
  CHECK(rows[3].report.accuracy == 1.0);
  CHECK(to_json(rows[4].report) == to_json(rows[2].report));
  const auto csv = sweep_to_csv(rows);
  CHECK(csv.rfind("Models,Weights,Accuracy\nSwin,/,1.0000\nTNT,/,0.6667\n\"Swin, TNT\",1:1,", 0) == 0);
  CHECK_THROWS_AS(ensemble_sweep({{"Swin", a}}, {{1, 1}}, truth), ConfigError);
}

TEST_CASE("format_accuracy rounds to four decimals") {
  CHECK(format_accuracy(0.947461) == "0.9475");
  CHECK(format_accuracy(2.0 / 3.0) == "0.6667");
  CHECK(format_accuracy(1.0) == "1.0000");
}
