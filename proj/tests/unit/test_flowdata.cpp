#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "afp/error.hpp"
#include "afp/flowdata/csv.hpp"
#include "afp/flowdata/preprocess.hpp"
#include "afp/flowdata/synth.hpp"

using namespace afp;
using namespace afp::flowdata;

namespace {

FeatureSchema one_feature() { return FeatureSchema({"x"}); }

Dataset column(const std::vector<double>& v) {
  return Dataset(one_feature(), v, std::vector<Label>(v.size(), Label::benign),
                 Provenance::synthetic);
}

Dataset classes(std::size_t benign, std::size_t attack) {
  std::vector<double> v;
  std::vector<Label> l;
  for (std::size_t i = 0; i < benign + attack; ++i) {
    v.push_back(static_cast<double>(i));
    l.push_back(i < benign ? Label::benign : Label::attack);
  }
  // Interleave so class order is not trivially sorted.
  std::mt19937_64 rng(3);
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  return Dataset(one_feature(), v, l, Provenance::synthetic).subset(idx);
}

// Independent of the loader: split on commas, strtod each schema cell.
std::size_t count_parsable_rows(const std::string& text, std::size_t schema_cols) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  std::size_t ok = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    bool good = cells.size() == schema_cols + 1 && !cells.back().empty();
    for (std::size_t i = 0; good && i < schema_cols; ++i) {
      char* end = nullptr;
      const double v = std::strtod(cells[i].c_str(), &end);
      good = !cells[i].empty() && end == cells[i].c_str() + cells[i].size() && std::isfinite(v);
    }
    ok += good;
  }
  return ok;
}

}  // namespace

TEST_CASE("csv: row with an empty cell is dropped") {
  std::istringstream in(
      "Duration,BytesPerSec,PktsPerSec,FwdPktLenMean,FlowIATMean,Label\n"
      "1.0,2,3,4,0.1,Benign\n"
      ",2,3,4,0.1,Attack\n"
      "2.0,5,6,7,0.2,DDoS\n");
  const auto r = read_csv(in, FeatureSchema::desk_default());
  CHECK(r.data.size() == 2);
  CHECK(r.dropped == 1);
  CHECK(r.data.label(0) == Label::benign);
  CHECK(r.data.label(1) == Label::attack);
  CHECK(r.data.row(1)[2] == 6.0);
}

TEST_CASE("csv: missing schema column is a schema error") {
  std::istringstream in("Duration,BytesPerSec,FwdPktLenMean,FlowIATMean,Label\n1,2,3,4,Benign\n");
  try {
    read_csv(in, FeatureSchema::desk_default());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::schema);
  }
}

TEST_CASE("csv: no surviving rows is an empty-dataset error") {
  std::istringstream in("x,Label\nabc,Benign\n");
  try {
    read_csv(in, one_feature());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::empty_dataset);
  }
}

TEST_CASE("csv: 1000 rows with 37 malformed ones, recounted by an independent scan") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::uniform_int_distribution<int> which(0, 5);
  std::vector<std::size_t> bad;
  {
    std::vector<std::size_t> all(1000);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    bad.assign(all.begin(), all.begin() + 37);
    std::sort(bad.begin(), bad.end());
  }
  std::ostringstream text;
  text << "Duration,BytesPerSec,PktsPerSec,FwdPktLenMean,FlowIATMean,Label\n";
  for (std::size_t i = 0; i < 1000; ++i) {
    const bool broken = std::binary_search(bad.begin(), bad.end(), i);
    const int slot = which(rng);
    for (int c = 0; c < 5; ++c) {
      if (broken && c == slot % 5) {
        text << (slot < 2 ? "" : slot < 4 ? "n/a" : "1e999");
      } else {
        text << u(rng);
      }
      text << ',';
    }
    text << (i % 3 ? "Benign" : "PortScan") << '\n';
  }
  const std::string s = text.str();
  std::istringstream in(s);
  const auto r = read_csv(in, FeatureSchema::desk_default());
  CHECK(r.data.size() == 963);
  CHECK(r.dropped == 37);
  CHECK(count_parsable_rows(s, 5) == r.data.size());
}

TEST_CASE("csv: quoted fields and round trip through write_csv") {
  const auto fields = split_csv_line(R"(a,"b,c","d""e",)");
  REQUIRE(fields.size() == 4);
  CHECK(fields[1] == "b,c");
  CHECK(fields[2] == "d\"e");
  CHECK(fields[3].empty());

  SynthConfig sc = SynthConfig::desk_default(200);
  const auto data = synth_generate(sc, 5);
  std::stringstream buf;
  write_csv(buf, data);
  const auto back = read_csv(buf, data.schema());
  REQUIRE(back.data.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back.data.label(i) == data.label(i));
    for (std::size_t j = 0; j < data.dims(); ++j) CHECK(back.data.row(i)[j] == data.row(i)[j]);
  }
}

TEST_CASE("standardize: constant column keeps divisor 1") {
  const auto [z, p] = standardize(column({2, 2, 2}));
  CHECK(p.std[0] == 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(z.row(i)[0] == 0.0);
}

TEST_CASE("standardize: two points map to -1 and 1") {
  const auto [z, p] = standardize(column({0, 10}));
  CHECK(p.mean[0] == 5.0);
  CHECK(p.std[0] == 5.0);
  CHECK(z.row(0)[0] == -1.0);
  CHECK(z.row(1)[0] == 1.0);
}

TEST_CASE("standardize: 500 random values have zero mean and unit std by a separate recount") {
  std::mt19937_64 rng(8);
  std::lognormal_distribution<double> g(3.0, 1.2);
  std::vector<double> v(500);
  for (auto& x : v) x = g(rng);
  const auto [z, p] = standardize(column(v));
  // Two-pass moments, written out independently of column_moments.
  long double sum = 0.0L;
  for (std::size_t i = 0; i < z.size(); ++i) sum += z.row(i)[0];
  const long double mean = sum / z.size();
  long double ss = 0.0L;
  for (std::size_t i = 0; i < z.size(); ++i) ss += (z.row(i)[0] - mean) * (z.row(i)[0] - mean);
  const double sd = std::sqrt(static_cast<double>(ss / z.size()));
  CHECK(std::abs(static_cast<double>(mean)) < 1e-9);
  CHECK(std::abs(sd - 1.0) < 1e-9);

  // Applying stored params reproduces the fit exactly.
  const auto [z2, p2] = standardize(column(v), p);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z2.row(i)[0] == z.row(i)[0]);
}

TEST_CASE("stratified split: exact balance and determinism") {
  const auto d = classes(10, 10);
  const auto s = stratified_split(d, 0.5, 17);
  CHECK(s.train.count(Label::benign) == 5);
  CHECK(s.train.count(Label::attack) == 5);
  CHECK(s.test.count(Label::benign) == 5);
  CHECK(s.test.count(Label::attack) == 5);
  const auto again = stratified_split(d, 0.5, 17);
  CHECK(std::equal(s.test.values().begin(), s.test.values().end(), again.test.values().begin()));
  CHECK(s.test.labels() == again.test.labels());
}

TEST_CASE("stratified split: 997 benign + 503 attack at 0.3, counted directly") {
  const auto d = classes(997, 503);
  const auto s = stratified_split(d, 0.3, 4);
  std::size_t b = 0, a = 0;
  for (Label l : s.test.labels()) (l == Label::benign ? b : a)++;
  CHECK(b >= 298);
  CHECK(b <= 300);
  CHECK(a >= 150);
  CHECK(a <= 152);
  CHECK(s.train.size() + s.test.size() == d.size());
  // Disjoint: every original value appears exactly once across the halves.
  std::vector<double> seen(s.train.values().begin(), s.train.values().end());
  seen.insert(seen.end(), s.test.values().begin(), s.test.values().end());
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("stratified split: single-class input is a stratification error") {
  try {
    stratified_split(column({1, 2, 3, 4}), 0.5, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::stratification);
  }
}

TEST_CASE("synth: exact class mix at an even count") {
  auto sc = SynthConfig::desk_default(4);
  const auto d = synth_generate(sc, 1);
  CHECK(d.count(Label::benign) == 2);
  CHECK(d.count(Label::attack) == 2);
}

TEST_CASE("synth: tiny variance concentrates around the mean") {
  SynthConfig sc;
  sc.schema = one_feature();
  sc.benign_mean = {100.0};
  sc.attack_mean = {100.0};
  sc.benign_var = {1e-6};
  sc.attack_var = {1e-6};
  sc.count = 1000;
  const auto d = synth_generate(sc, 2);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(d.row(i)[0] - 100.0) <= 0.01);
}

TEST_CASE("synth: a midpoint threshold rule separates the 6-sigma classes") {
  const auto sc = SynthConfig::desk_default(10000);
  const auto d = synth_generate(sc, 77);
  // Project onto the mean difference in per-feature sd units; split at the midpoint.
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double score = 0.0, mid = 0.0;
    for (std::size_t j = 0; j < d.dims(); ++j) {
      const double sd = std::sqrt(sc.benign_var[j]);
      const double dir = (sc.attack_mean[j] - sc.benign_mean[j]) / sd;
      score += dir * d.row(i)[j] / sd;
      mid += dir * 0.5 * (sc.attack_mean[j] + sc.benign_mean[j]) / sd;
    }
    const Label guess = score > mid ? Label::attack : Label::benign;
    correct += guess == d.label(i);
  }
  CHECK(static_cast<double>(correct) / d.size() >= 0.99);
}

TEST_CASE("synth: bit-reproducible per seed, different across seeds") {
  const auto sc = SynthConfig::desk_default(300);
  const auto a = synth_generate(sc, 9), b = synth_generate(sc, 9), c = synth_generate(sc, 10);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
}

TEST_CASE("schema hash is stable and order sensitive") {
  CHECK(FeatureSchema({"a", "b"}).hash() == FeatureSchema({"a", "b"}).hash());
  CHECK(FeatureSchema({"a", "b"}).hash() != FeatureSchema({"b", "a"}).hash());
  CHECK(FeatureSchema::desk_default().hash().size() == 16);
}
