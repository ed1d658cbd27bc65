#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mofill/error.hpp"
#include "mofill/io.hpp"
#include "mofill/run_config.hpp"
#include "mofill/svg.hpp"
#include "test_util.hpp"

using namespace mofill;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(MOFILL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

// Balanced, properly nested tags; enough to catch malformed output.
bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  while ((i = s.find('<', i)) != std::string::npos) {
    const std::size_t e = s.find('>', i);
    if (e == std::string::npos) return false;
    std::string tag = s.substr(i + 1, e - i - 1);
    i = e + 1;
    if (tag.empty() || tag[0] == '?' || tag[0] == '!') continue;
    if (tag.back() == '/') continue;
    const bool closing = tag[0] == '/';
    std::string name = tag.substr(closing ? 1 : 0);
    name = name.substr(0, name.find_first_of(" \t\n"));
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else {
      stack.push_back(name);
    }
  }
  return stack.empty();
}

// One small trained model shared by the tests in this file.
class CliTest : public ::testing::Test {
 protected:
  static fs::path dir;

  static void SetUpTestSuite() {
    dir = test::temp_dir("cli");
    ASSERT_EQ(run("gen-data --count 6 --frames 240 --seed 3 --out " + (dir / "data").string()), 0);
    std::ofstream(dir / "run.cfg") << "# tiny model\nepochs = 1\nbatch_size = 4\n"
                                      "channels = 2,3,4,5,256\nval_fraction = 0.2\nthreads = 1\n";
    ASSERT_EQ(run("train --config " + (dir / "run.cfg").string() + " --data " +
                  (dir / "data").string() + " --weights " + (dir / "m.weights").string() +
                  " --log " + (dir / "log.csv").string()),
              0);
  }

  std::string clip() const { return (dir / "data" / "corpus-0000.csv").string(); }
  std::string weights() const { return (dir / "m.weights").string(); }
};

fs::path CliTest::dir;

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run("infill --clip a.csv --weights b --out c.csv"), 1);  // missing --gap
  EXPECT_EQ(run("gen-data --count 0 --out /tmp/x"), 1);
  EXPECT_EQ(run("eval --pred a.csv"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(CliTest, GenDataWritesRequestedClips) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir / "data")) n += e.path().extension() == ".csv";
  EXPECT_EQ(n, 6);
  EXPECT_EQ(load_clip(clip()).frames(), 240);
  EXPECT_TRUE(fs::exists(dir / "m.stats"));
  EXPECT_EQ(count_lines(slurp(dir / "log.csv")), 2);
}

TEST_F(CliTest, InfillKeepsFrameCount) {
  const auto out = dir / "filled.csv";
  ASSERT_EQ(run("infill --clip " + clip() + " --weights " + weights() +
                " --gap 50:20 --gap 120:40 --out " + out.string()),
            0);
  EXPECT_EQ(load_clip(out).frames(), 240);
  EXPECT_EQ(run("infill --clip " + clip() + " --weights " + weights() + " --gap 230:20 --out " +
                out.string()),
            1);
  EXPECT_EQ(run("infill --clip " + clip() + " --weights " + (dir / "missing.weights").string() +
                " --gap 5:5 --out " + out.string()),
            2);
  EXPECT_EQ(run("infill --clip " + (dir / "nope.csv").string() + " --weights " + weights() +
                " --gap 5:5 --out " + out.string()),
            2);
}

TEST_F(CliTest, EvalWritesOneRow) {
  const auto out = dir / "err.csv";
  ASSERT_EQ(run("eval --pred " + clip() + " --truth " + clip() + " --gap 10:20 --scope gap --out " +
                out.string()),
            0);
  const std::string csv = slurp(out);
  EXPECT_EQ(count_lines(csv), 2);
  EXPECT_NE(csv.find("gap,root,20,0,0"), std::string::npos);
  EXPECT_EQ(run("eval --sweep gap --weights " + weights() + " --data " + (dir / "data").string() +
                " --values 0,30 --out " + (dir / "sweep.csv").string()),
            0);
  EXPECT_EQ(count_lines(slurp(dir / "sweep.csv")), 3);
  EXPECT_EQ(run("eval --sweep bones --data " + (dir / "data").string() + " --out " +
                (dir / "bones.csv").string()),
            0);
  EXPECT_EQ(count_lines(slurp(dir / "bones.csv")), 22);
}

TEST_F(CliTest, OtherTasksRun) {
  const std::string io = " --weights " + weights() + " --clip " + clip() + " --out " +
                         (dir / "o.csv").string();
  EXPECT_EQ(run("denoise --kind frame_drop --p 0.2" + io), 0);
  EXPECT_EQ(run("recover --joints 3,LeftHand" + io), 0);
  EXPECT_EQ(run("recover --joints 1,2,3,4" + io), 1);
  EXPECT_EQ(run("blend --gap 100:40 --source " + clip() + " --joints 5 --at 110:10" + io), 0);
  EXPECT_EQ(run("blend --gap 100:40 --source " + clip() + " --joints 5 --at 110:4" + io), 1);
  EXPECT_EQ(run("bench --weights " + weights() + " --lengths 32,64 --runs 1 --out " +
                (dir / "b.csv").string()),
            0);
  EXPECT_EQ(count_lines(slurp(dir / "b.csv")), 3);
}

TEST_F(CliTest, ExportSvgIsWellFormed) {
  const auto out = dir / "strip.svg";
  ASSERT_EQ(run("export-svg --clip " + clip() + " --gap 60:40 --stride 20 --out " + out.string()), 0);
  const std::string svg = slurp(out);
  EXPECT_TRUE(well_formed_xml(svg));
  EXPECT_NE(svg.find("#2e9e44"), std::string::npos);
  EXPECT_EQ(run("export-svg --clip " + clip() + " --out /nonexistent-dir/x/strip.svg"), 2);
}

TEST(RunConfig, ParsesKeys) {
  const RunConfig c = parse_run_config(
      "epochs = 7\n# comment\nlearning_rate=0.01\ncurriculum = off\nchannels = 2,3,4,5,256\n"
      "data = clips  # trailing\n");
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_DOUBLE_EQ(c.train.optim.learning_rate, 0.01);
  EXPECT_FALSE(c.train.curriculum);
  EXPECT_EQ(c.train.model.channels[3], 5);
  EXPECT_EQ(c.data, "clips");
  EXPECT_TRUE(c.has("epochs"));
  EXPECT_FALSE(c.has("seed"));
}

TEST(RunConfig, Rejections) {
  EXPECT_THROW(parse_run_config("bogus = 1\n"), UsageError);
  EXPECT_THROW(parse_run_config("epochs = 1\nepochs = 2\n"), UsageError);
  EXPECT_THROW(parse_run_config("epochs\n"), UsageError);
  EXPECT_THROW(parse_run_config("epochs = many\n"), UsageError);
  EXPECT_THROW(parse_run_config("channels = 1,2\n"), UsageError);
  EXPECT_THROW(load_run_config("/nonexistent/run.cfg"), UsageError);
  EXPECT_TRUE(parse_bool("yes"));
  EXPECT_FALSE(parse_bool("0"));
  EXPECT_THROW(parse_bool("maybe"), UsageError);
}

TEST(Svg, FiguresFollowStrideAndGapColor) {
  const PoseClip c = synth_corpus(1, 2, 50)[0];
  SvgOptions o;
  o.stride = 10;
  const std::string svg = clip_to_svg(c, GapSet({Gap{20, 10}}), o);
  EXPECT_TRUE(well_formed_xml(svg));
  std::size_t groups = 0;
  for (std::size_t i = 0; (i = svg.find("data-frame=", i)) != std::string::npos; ++i) ++groups;
  EXPECT_EQ(groups, 5u);
  EXPECT_NE(svg.find("data-frame=\"20\""), std::string::npos);
  EXPECT_NE(svg.find(o.gap_color), std::string::npos);
  EXPECT_EQ(svg, clip_to_svg(c, GapSet({Gap{20, 10}}), o));
}

TEST(Svg, ErrorCurve) {
  ErrorReport r;
  r.mean = 2.0;
  const std::string svg = error_curve_svg({{0, r, r}, {20, r, r}}, "gap");
  EXPECT_TRUE(well_formed_xml(svg));
  EXPECT_NE(svg.find("polyline"), std::string::npos);
}
