#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "support.hpp"

namespace vlc {
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VLC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    std::ofstream out(dir / "tiny.cfg");
    for (const auto& [k, v] : config_entries(test::tiny_run())) out << k << " = " << v << "\n";
  }
  std::string common(const std::string& out) const {
    return "--config " + (dir / "tiny.cfg").string() + " --quiet --out " + (dir / out).string();
  }
  test::TempDir dir{"cli"};
};

TEST_F(Cli, PretrainEvalAndProbes) {
  ASSERT_EQ(run_cli("pretrain " + common("pre")), 0);
  const auto ck = (dir / "pre" / "checkpoint.bin").string();
  ASSERT_TRUE(std::filesystem::exists(ck));
  EXPECT_TRUE(std::filesystem::exists(dir / "pre" / "train.log"));
  const auto m = read_metrics(dir / "pre" / "metrics.tsv");
  EXPECT_EQ(m.front().second, 6.0);

  ASSERT_EQ(run_cli("eval --checkpoint " + ck + " " + common("eval")), 0);
  EXPECT_FALSE(read_metrics(dir / "eval" / "metrics.tsv").empty());

  ASSERT_EQ(run_cli("probe heatmap --checkpoint " + ck + " " + common("heat")), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "heat" / "heatmap.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "heat" / "heatmap.tsv"));
  ASSERT_EQ(run_cli("probe cluster --checkpoint " + ck + " " + common("clu")), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "clu" / "clusters.ppm"));
  ASSERT_EQ(run_cli("probe nounsim --set probe.nouns=circle,zebra --checkpoint " + ck + " " + common("noun")), 0);
  const auto nm = read_metrics(dir / "noun" / "metrics.tsv");
  EXPECT_NE(std::find_if(nm.begin(), nm.end(), [](const auto& kv) { return kv.first == "unknown_zebra"; }), nm.end());

  ASSERT_EQ(run_cli("finetune retrieval --set train.steps=2 --init " + ck + " " + common("ret")), 0);
  EXPECT_EQ(load_checkpoint(dir / "ret" / "checkpoint.bin").kind, "finetune-retrieval");
}

TEST_F(Cli, MimStageThenWarmStartedJointRun) {
  ASSERT_EQ(run_cli("pretrain-mim --set train.steps=3 " + common("mim")), 0);
  const auto ck = (dir / "mim" / "checkpoint.bin").string();
  EXPECT_EQ(load_checkpoint(ck).kind, "pretrain-mim");
  ASSERT_EQ(run_cli("pretrain --set train.init=" + ck + " --set train.steps=2 " + common("joint")), 0);
  EXPECT_EQ(load_checkpoint(dir / "joint" / "checkpoint.bin").step, 2u);
}

TEST_F(Cli, ResumeFinishesAnInterruptedRun) {
  ASSERT_EQ(run_cli("pretrain --set train.checkpoint_every=3 " + common("full")), 0);
  // Three steps taken in-process with the same schedule stand in for the interruption.
  const auto partial = dir / "partial.bin";
  {
    auto cfg = test::tiny_run();
    cfg.checkpoint_every = 3;
    auto d = load_run_data(cfg);
    Pretrainer t(cfg, d.train, build_run_vocab(d, cfg));
    for (int i = 0; i < 3; ++i) t.step();
    save_checkpoint(partial, t.checkpoint());
  }
  ASSERT_EQ(run_cli("pretrain --set train.checkpoint_every=3 --resume " + partial.string() + " " + common("resumed")), 0);
  std::ifstream x(dir / "full" / "checkpoint.bin", std::ios::binary), y(dir / "resumed" / "checkpoint.bin", std::ios::binary);
  const std::string a{std::istreambuf_iterator<char>(x), {}}, b{std::istreambuf_iterator<char>(y), {}};
  EXPECT_EQ(a, b);
}

TEST_F(Cli, GenDataWritesAManifest) {
  ASSERT_EQ(run_cli("gen-data --set data.synthetic_count=3 --ext .ppm " + common("data")), 0);
  const auto loaded = data::load_jsonl(dir / "data" / "manifest.jsonl", dir / "data", 16, 16, 3);
  EXPECT_EQ(loaded.items.size(), 3u);
  EXPECT_TRUE(loaded.errors.empty());
}

TEST_F(Cli, BadInputsExitNonZero) {
  EXPECT_EQ(run_cli("pretrain --set model.heads=5 " + common("bad")), 2);
  EXPECT_EQ(run_cli("pretrain --set model.nonsense=1 " + common("bad")), 2);
  EXPECT_EQ(run_cli("pretrain --config " + (dir / "missing.cfg").string()), 2);
  EXPECT_EQ(run_cli("eval --checkpoint " + (dir / "missing.bin").string() + " " + common("bad")), 1);
  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_NE(run_cli(""), 0);
}

}  // namespace
}  // namespace vlc
