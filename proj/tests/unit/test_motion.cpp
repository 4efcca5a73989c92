#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace gomkit;

namespace {

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << '\n';
  }
}

std::vector<std::vector<std::string>> numeric_rows(std::size_t t, std::size_t n) {
  std::vector<std::vector<std::string>> rows(t, std::vector<std::string>(n));
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < n; ++j) rows[i][j] = std::to_string(0.5 * static_cast<double>(i) + static_cast<double>(j));
  return rows;
}

} // namespace

TEST(LoadMotionCsv, WellFormedFile) {
  fx::TempDir dir("motion");
  const auto topo = SkeletonTopology::default_body();
  write_csv(dir / "a.csv", topo.channel_names(), numeric_rows(100, 57));
  const auto seq = load_motion_csv(dir / "a.csv", topo);
  EXPECT_EQ(seq.length(), 100u);
  EXPECT_EQ(seq.channel_count(), 57u);
  EXPECT_DOUBLE_EQ(seq.at(4, 3), 5.0);
  EXPECT_DOUBLE_EQ(seq.frame_rate_hz(), 90.0);
}

TEST(LoadMotionCsv, PermutedColumnsAreReordered) {
  fx::TempDir dir("motion");
  const auto topo = fx::two_joint_topology();
  auto header = topo.channel_names();
  std::reverse(header.begin(), header.end());
  write_csv(dir / "p.csv", header, numeric_rows(5, 6));
  const auto seq = load_motion_csv(dir / "p.csv", topo);
  EXPECT_EQ(seq.channel_names(), topo.channel_names());
  // Column "SP.z" held j=0 values; it is the last topology channel.
  EXPECT_DOUBLE_EQ(seq.at(2, 5), 1.0);
  EXPECT_DOUBLE_EQ(seq.at(2, 0), 6.0);
}

TEST(LoadMotionCsv, MissingChannelIsReported) {
  fx::TempDir dir("motion");
  const auto topo = SkeletonTopology::default_body();
  auto header = topo.channel_names();
  header.erase(std::find(header.begin(), header.end(), "H.z"));
  write_csv(dir / "m.csv", header, numeric_rows(10, 56));
  try {
    load_motion_csv(dir / "m.csv", topo);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("missing channel 'H.z'"), std::string::npos) << e.what();
  }
}

TEST(LoadMotionCsv, NanIdentifiesRowAndChannel) {
  fx::TempDir dir("motion");
  const auto topo = fx::two_joint_topology();
  auto rows = numeric_rows(10, 6);
  rows[7][4] = "NaN";
  write_csv(dir / "n.csv", topo.channel_names(), rows);
  try {
    load_motion_csv(dir / "n.csv", topo);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 7"), std::string::npos) << msg;
    EXPECT_NE(msg.find("SP.y"), std::string::npos) << msg;
  }
}

TEST(LoadMotionCsv, RejectsBadInput) {
  fx::TempDir dir("motion");
  const auto topo = fx::two_joint_topology();
  auto rows = numeric_rows(10, 6);
  rows[2][1] = "abc";
  write_csv(dir / "x.csv", topo.channel_names(), rows);
  EXPECT_THROW(load_motion_csv(dir / "x.csv", topo), ValidationError);

  write_csv(dir / "short.csv", topo.channel_names(), numeric_rows(2, 6));
  EXPECT_THROW(load_motion_csv(dir / "short.csv", topo), ValidationError);

  auto header = topo.channel_names();
  header[0] = "Q.x";
  write_csv(dir / "u.csv", header, numeric_rows(5, 6));
  EXPECT_THROW(load_motion_csv(dir / "u.csv", topo), ValidationError);

  EXPECT_THROW(load_motion_csv(dir / "absent.csv", topo), ValidationError);
}

TEST(LoadMotionCsv, ReadsFpsComment) {
  std::istringstream in("# fps=120\nJ.x,J.y,J.z\n1,2,3\n4,5,6\n");
  const auto table = parse_motion_csv(in);
  EXPECT_DOUBLE_EQ(table.frame_rate_hz, 120.0);
  EXPECT_EQ(table.rows.size(), 2u);
}

TEST(LoadMotionCsv, LargeJumpWarnsButLoads) {
  fx::TempDir dir("motion");
  const auto topo = fx::single_joint_topology();
  write_csv(dir / "j.csv", topo.channel_names(), {{"0", "0", "0"}, {"179", "0", "0"}, {"-179", "0", "0"}});
  std::vector<std::string> warnings;
  ScopedWarningHandler guard([&](const std::string& m) { warnings.push_back(m); });
  const auto seq = load_motion_csv(dir / "j.csv", topo);
  EXPECT_EQ(seq.length(), 3u);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("frame 2"), std::string::npos);
}

TEST(SaveMotionCsv, RoundTripsBitExactly) {
  fx::TempDir dir("motion");
  const auto topo = fx::mini6_topology();
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto frames = fx::random_frames(20, topo.channel_count(), rng, 57.3);
    frames(0, 0) = 0.1;
    frames(1, 1) = -1e-300;
    frames(2, 2) = 123456789.123456789;
    const auto seq = fx::sequence_from(frames, topo);
    save_motion_csv(dir / "rt.csv", seq);
    const auto back = load_motion_csv(dir / "rt.csv", topo);
    EXPECT_EQ(back.frames(), seq.frames());
  }
}

TEST(Dataset, SaveLoadPreservesLabelsAndData) {
  fx::TempDir dir("dataset");
  const auto topo = fx::two_joint_topology();
  Rng rng(4);
  std::vector<PostureSequence> seqs;
  for (const char* label : {"a", "b", "a"})
    seqs.push_back(PostureSequence(fx::random_frames(6, 6, rng), topo.channel_names(), 90.0, label, "s1"));
  const MovementDataset ds(seqs, topo);
  save_dataset(dir.path(), ds);
  const auto back = load_dataset(dir.path());
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.class_labels(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(back.indices_of("a"), (std::vector<std::size_t>{0, 2}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back[i], ds[i]);
}

TEST(Dataset, RejectsMismatchedChannels) {
  const auto topo = fx::two_joint_topology();
  Rng rng(1);
  PostureSequence s(fx::random_frames(5, 3, rng), fx::single_joint_topology().channel_names());
  EXPECT_THROW(MovementDataset({s}, topo), ValidationError);
}

TEST(PostureSequenceType, ValidatesInvariants) {
  Rng rng(2);
  const auto names = fx::single_joint_topology().channel_names();
  EXPECT_THROW(PostureSequence(fx::random_frames(2, 3, rng), names), ValidationError);
  EXPECT_THROW(PostureSequence(fx::random_frames(5, 2, rng), names), ShapeError);
  auto f = fx::random_frames(5, 3, rng);
  f(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(PostureSequence(f, names), ValidationError);
  EXPECT_THROW(PostureSequence(fx::random_frames(5, 3, rng), names, 0.0), ValidationError);
}
