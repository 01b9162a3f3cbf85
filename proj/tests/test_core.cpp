#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "graspdec/core.hpp"
#include "graspdec/dataset_io.hpp"
#include "graspdec/io.hpp"
#include "test_util.hpp"

using namespace graspdec;

namespace {

std::string slurp(const std::filesystem::path& p) { return io::read_file(p); }

}  // namespace

TEST(Montage, StandardLayoutIsValid) {
  const auto m = ChannelMontage::standard16();
  ASSERT_EQ(m.size(), 16u);
  EXPECT_NO_THROW(m.validate());
  EXPECT_EQ(m.names.front(), "FP1");
  EXPECT_EQ(m.names.back(), "O2");
  const auto cz = m.positions[m.index_of("Cz")];
  EXPECT_DOUBLE_EQ(cz.x, 0.0);
  EXPECT_DOUBLE_EQ(cz.y, 0.0);
  // left hemisphere has negative x, frontal sites positive y
  EXPECT_LT(m.positions[m.index_of("C3")].x, 0.0);
  EXPECT_GT(m.positions[m.index_of("C4")].x, 0.0);
  EXPECT_GT(m.positions[m.index_of("Fz")].y, 0.0);
  EXPECT_LT(m.positions[m.index_of("Oz")].y, 0.0);
}

TEST(Montage, RejectsDuplicatesAndFarPositions) {
  auto m = ChannelMontage::standard16();
  m.names[1] = m.names[0];
  EXPECT_THROW(m.validate(), DataError);
  m = ChannelMontage::standard16();
  m.positions[0] = {1.2, 0.0};
  EXPECT_THROW(m.validate(), DataError);
  m = ChannelMontage::standard16();
  m.positions.pop_back();
  EXPECT_THROW(m.validate(), DataError);
  EXPECT_THROW((void)m.index_of("T7"), ConfigError);
}

TEST(Labels, NamesAndRange) {
  EXPECT_EQ(label_name(Label::pen), "pen");
  EXPECT_EQ(label_from_name("bottle"), Label::bottle);
  EXPECT_EQ(label_from_int(2), Label::empty);
  EXPECT_THROW(label_from_int(5), DataError);
  EXPECT_THROW(label_from_int(-1), DataError);
  EXPECT_THROW(label_from_name("cup"), ConfigError);
}

TEST(Trial, PhaseBlocksMatchTaskTiming) {
  Rng rng(1);
  const Trial t = testutil::random_trial(rng, 16, 1472, Label::pen, 0, 768);
  const auto planning = segment_phase(t, Phase::planning);
  const auto movement = segment_phase(t, Phase::movement);
  EXPECT_EQ(planning.rows(), 16);
  EXPECT_EQ(planning.cols(), 768);
  EXPECT_EQ(movement.cols(), 704);
}

TEST(Trial, PhasesPartitionTheTrial) {
  Rng rng(2);
  const Trial t = testutil::random_trial(rng, 4, 300, Label::bottle, 20, 140);
  Eigen::MatrixXd joined(4, 280);
  joined << segment_phase(t, Phase::planning), segment_phase(t, Phase::movement);
  EXPECT_EQ(joined, t.data.rightCols(280).cast<double>());
}

TEST(Trial, EmptyPhaseAndBadOnsets) {
  Rng rng(3);
  Trial t = testutil::random_trial(rng, 2, 100, Label::pen, 50, 50);
  EXPECT_THROW(segment_phase(t, Phase::planning), DataError);
  EXPECT_THROW(t.validate(), DataError);
  t.movement_onset = 101;
  EXPECT_THROW(t.validate(), DataError);
  t.movement_onset = 60;
  t.data(0, 3) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(t.validate(), DataError);
}

TEST(TrialWindow, TagsRoundTrip) {
  EXPECT_EQ(TrialWindow::from_tag("planning").tag(), "planning");
  EXPECT_EQ(TrialWindow::from_tag("movement").phase(), Phase::movement);
  const auto w = TrialWindow::from_tag("samples_0_384");
  EXPECT_EQ(w.tag(), "samples_0_384");
  EXPECT_EQ(w.explicit_range(), (SampleRange{0, 384}));
  EXPECT_THROW(TrialWindow::from_tag("samples_9_3"), DataError);
  EXPECT_THROW(TrialWindow::from_tag("rest"), DataError);
}

TEST(Split, DefaultCounts) {
  const Dataset ds = testutil::noise_dataset(11, 75, 64, 32);
  const auto [train, test] = split_train_test(ds, 15, 7);
  const auto tr = train.class_counts(), te = test.class_counts();
  for (int l = 0; l < kNumLabels; ++l) {
    EXPECT_EQ(tr[static_cast<std::size_t>(l)], 60u);
    EXPECT_EQ(te[static_cast<std::size_t>(l)], 15u);
  }
}

TEST(Split, PartitionPropertyOverSeeds) {
  Dataset ds = testutil::noise_dataset(12, 9, 16, 8);
  // tag each trial so membership can be traced
  for (std::size_t i = 0; i < ds.trials.size(); ++i) ds.trials[i].subject_id = std::to_string(i);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto [train, test] = split_train_test(ds, 3, seed);
    std::multiset<std::string> seen;
    for (const auto& t : train.trials) seen.insert(t.subject_id);
    for (const auto& t : test.trials) seen.insert(t.subject_id);
    ASSERT_EQ(seen.size(), ds.trials.size());
    ASSERT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), ds.trials.size());
    for (auto c : test.class_counts()) ASSERT_EQ(c, 3u);
  }
}

TEST(Split, ZeroHoldoutAndDeterminism) {
  const Dataset ds = testutil::noise_dataset(13, 5, 16, 8);
  const auto none = split_train_test(ds, 0, 3);
  EXPECT_EQ(none.train, ds);
  EXPECT_TRUE(none.test.trials.empty());
  EXPECT_EQ(split_train_test(ds, 2, 99).test, split_train_test(ds, 2, 99).test);
  EXPECT_NE(split_train_test(ds, 2, 99).test, split_train_test(ds, 2, 100).test);
  EXPECT_THROW(split_train_test(ds, 5, 1), DataError);
}

TEST(DatasetIo, RoundTripIsBitExact) {
  testutil::TempDir dir;
  Dataset ds = testutil::noise_dataset(21, 2, 40, 20);
  ds.trials[1].data(3, 7) = -0.0f;
  ds.trials[2].data(0, 0) = 1e-38f;
  save_dataset(ds, dir.path());
  const Dataset back = load_dataset(dir.path());
  ASSERT_EQ(back.trials.size(), ds.trials.size());
  EXPECT_EQ(back.montage, ds.montage);
  EXPECT_EQ(back.sample_rate, ds.sample_rate);
  for (std::size_t i = 0; i < ds.trials.size(); ++i) {
    EXPECT_EQ(encode_payload(back.trials[i].data), encode_payload(ds.trials[i].data));
    EXPECT_EQ(back.trials[i].label, ds.trials[i].label);
    EXPECT_EQ(back.trials[i].movement_onset, ds.trials[i].movement_onset);
  }
  EXPECT_EQ(load_dataset(dir / "manifest.json").trials.size(), ds.trials.size());
}

TEST(DatasetIo, PayloadSizeAndDeterministicBytes) {
  testutil::TempDir a, b;
  Rng rng(5);
  Dataset ds;
  ds.trials.push_back(testutil::random_trial(rng, 16, 768, Label::pen, 0, 384));
  save_dataset(ds, a.path());
  save_dataset(ds, b.path());
  EXPECT_EQ(std::filesystem::file_size(a / payload_name(0)), 16u * 768u * 4u);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  EXPECT_EQ(slurp(a / payload_name(0)), slurp(b / payload_name(0)));
}

TEST(DatasetIo, EmptyDatasetWritesOnlyManifest) {
  testutil::TempDir dir;
  Dataset ds;
  save_dataset(ds, dir.path());
  const auto doc = io::read_json(dir / "manifest.json");
  EXPECT_TRUE(doc.at("trials").empty());
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir.path()), {}), 1);
  EXPECT_TRUE(load_dataset(dir.path()).trials.empty());
}

TEST(DatasetIo, Errors) {
  testutil::TempDir dir;
  const Dataset ds = testutil::noise_dataset(22, 1, 10, 5);
  save_dataset(ds, dir.path());
  auto doc = io::read_json(dir / "manifest.json");

  auto write_and_load = [&](const nlohmann::json& j) {
    io::write_json(dir / "manifest.json", j);
    return load_dataset(dir.path());
  };

  auto bad = doc;
  bad["trials"][0]["label"] = 5;
  try {
    write_and_load(bad);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("invalid label"), std::string::npos);
  }

  bad = doc;
  bad["format_version"] = 2;
  EXPECT_THROW(write_and_load(bad), DataError);

  bad = doc;
  bad["channels"].erase(0);
  EXPECT_THROW(write_and_load(bad), DataError);

  bad = doc;
  bad.erase("sample_rate");
  EXPECT_THROW(write_and_load(bad), DataError);

  // non-finite payload value
  write_and_load(doc);
  std::string bytes = slurp(dir / payload_name(1));
  const float nan = std::numeric_limits<float>::infinity();
  std::memcpy(bytes.data() + 8, &nan, 4);
  {
    std::ofstream out(dir / payload_name(1), std::ios::binary);
    out << bytes;
  }
  EXPECT_THROW(load_dataset(dir.path()), DataError);

  std::filesystem::remove(dir / payload_name(1));
  EXPECT_ANY_THROW(load_dataset(dir.path()));
}

TEST(DatasetIo, CsvImport) {
  testutil::TempDir dir;
  ChannelMontage m;
  m.names = {"C3", "Cz"};
  m.positions = {{-0.5, 0.0}, {0.0, 0.0}};
  {
    std::ofstream out(dir / "t.csv");
    out << "C3,Cz\n1,2\n3.5,-4\n0.25,8\n";
  }
  const Trial t = import_csv_trial(dir / "t.csv", m, Label::empty, 0, 2, "X");
  ASSERT_EQ(t.data.rows(), 2);
  ASSERT_EQ(t.data.cols(), 3);
  EXPECT_EQ(t.data(0, 1), 3.5f);
  EXPECT_EQ(t.data(1, 1), -4.0f);
  EXPECT_EQ(t.data(1, 2), 8.0f);
  {
    std::ofstream out(dir / "bad.csv");
    out << "C3,C4\n1,2\n";
  }
  EXPECT_THROW(import_csv_trial(dir / "bad.csv", m, Label::pen, 0, 1, "X"), DataError);
  {
    std::ofstream out(dir / "short.csv");
    out << "C3,Cz\n1\n";
  }
  EXPECT_THROW(import_csv_trial(dir / "short.csv", m, Label::pen, 0, 1, "X"), DataError);
}

TEST(Rng, DeterministicAndSeedSensitive) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(Rng(42).next(), Rng(43).next());
  EXPECT_NE(derive_seed(1, "split"), derive_seed(1, "cv"));
  EXPECT_EQ(derive_seed(1, "split"), derive_seed(1, "split"));
  // FNV-1a reference value for the empty string
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Rng, UniformBelowAndGaussianMoments) {
  Rng rng(9);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    s += g;
    s2 += g * g;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 10.0, -3.25, 1e-300, 123456789.0, 0.30000000000000004}) {
    EXPECT_EQ(io::parse_double(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(10.0), "10");
  EXPECT_THROW(io::parse_double("abc"), DataError);
}
