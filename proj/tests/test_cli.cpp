#include "spmat/run_config.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace spmat;
using testing_support::TempDir;

namespace {

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    out.push_back(l);
  return out;
}

std::size_t columns(const std::string &line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

/// Runs the CLI with output silenced and returns its exit status.
int run(const std::string &args) {
  const std::string cmd = std::string(SPMAT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(RunConfig, ExampleConfigs) {
  auto a = build_run_config(std::nullopt, {"loss.kind=sup-bt", "loss.lambda=0.0051", "train.batch_size=128"});
  EXPECT_EQ(a.train.loss.kind, LossKind::SupBt);
  EXPECT_DOUBLE_EQ(a.train.loss.lambda, 0.0051);
  EXPECT_EQ(a.train.batch_size_for(Phase::Pretrain), 128u);
  auto b = build_run_config(std::nullopt, {"loss.kind=supcon", "loss.temperature=0.03", "train.batch_size=256"});
  EXPECT_EQ(b.train.loss.kind, LossKind::SupCon);
  EXPECT_DOUBLE_EQ(b.train.loss.temperature, 0.03);
  EXPECT_EQ(b.train.batch_size_for(Phase::Pretrain), 256u);
}

TEST(RunConfig, Defaults) {
  RunConfig c;
  EXPECT_EQ(c.train.batch_size_for(Phase::Pretrain), 128u);
  EXPECT_EQ(c.train.batch_size_for(Phase::Finetune), 128u);
  EXPECT_EQ(c.train.epochs_for(Phase::Pretrain), 15u);
  EXPECT_EQ(c.train.epochs_for(Phase::Finetune), 200u);
  EXPECT_DOUBLE_EQ(c.train.lr_for(Phase::Pretrain), 1e-5);
  EXPECT_DOUBLE_EQ(c.train.lr_for(Phase::Finetune), 1e-3);
  c.set("loss.kind", "supcon");
  EXPECT_EQ(c.train.batch_size_for(Phase::Pretrain), 256u);
}

TEST(RunConfig, Errors) {
  RunConfig c;
  EXPECT_SPMAT_ERROR(c.set("loss.gamma", "1"), ErrorCode::UnknownKey);
  EXPECT_SPMAT_ERROR(c.set("loss.temperature", "abc"), ErrorCode::InvalidConfig);
  EXPECT_SPMAT_ERROR(c.set("loss.kind", "triplet"), ErrorCode::InvalidConfig);
  EXPECT_SPMAT_ERROR(parse_override("no-equals"), ErrorCode::InvalidConfig);
  EXPECT_SPMAT_ERROR(build_run_config(std::nullopt, {"loss.temperature=0"}), ErrorCode::InvalidConfig);
}

TEST(RunConfig, FileThenOverrides) {
  TempDir dir("cfg");
  std::ofstream(dir.path() / "run.cfg") << "# comment\nloss.kind = bt\nloss.lambda=0.5  # trailing\n\ntrain.seed=3\n";
  const auto c = build_run_config(dir.path() / "run.cfg", {"loss.lambda=0.25"});
  EXPECT_EQ(c.train.loss.kind, LossKind::BarlowTwins);
  EXPECT_DOUBLE_EQ(c.train.loss.lambda, 0.25);
  EXPECT_EQ(c.train.seed, 3u);
}

TEST(RunConfig, EveryListedKeyIsSettable) {
  for (const auto &k : config_keys()) {
    RunConfig c;
    try {
      c.set(k, "1");
    } catch (const Error &e) {
      EXPECT_NE(e.code(), ErrorCode::UnknownKey) << k;
    }
  }
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli_codes");
  const auto out = dir.path().string();
  EXPECT_EQ(run("synth --out " + out + " --set synth.n_crystals=4"), 0);
  EXPECT_EQ(run("pretrain --out " + out + " --set loss.gamma=1"), 2);
  EXPECT_EQ(run("--bogus-flag"), 2);
  EXPECT_EQ(run("stats --out " + out + " --manifest " + out + "/missing.csv"), 3);
  EXPECT_EQ(run("finetune --out " + out + " --manifest " + out + "/manifest.csv"), 2);
}

TEST(Cli, SynthIsDeterministic) {
  TempDir a("cli_a"), b("cli_b");
  ASSERT_EQ(run("synth --seed 7 --set synth.n_crystals=4 --out " + a.path().string()), 0);
  ASSERT_EQ(run("synth --seed 7 --set synth.n_crystals=4 --out " + b.path().string()), 0);
  std::size_t cifs = 0;
  for (const auto &e : std::filesystem::directory_iterator(a.path() / "cif")) {
    ++cifs;
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / "cif" / e.path().filename()));
  }
  EXPECT_EQ(cifs, 4u);
  const auto manifest = lines(slurp(a.path() / "manifest.csv"));
  ASSERT_EQ(manifest.size(), 5u);
  EXPECT_EQ(manifest[0], "id,cif_path,surrogate_label,target,split");
  EXPECT_EQ(slurp(a.path() / "manifest.csv"), slurp(b.path() / "manifest.csv"));
}

TEST(Cli, StatsAndPreview) {
  TempDir dir("cli_stats");
  const auto out = dir.path().string();
  ASSERT_EQ(run("synth --set synth.n_crystals=6 --out " + out), 0);
  const auto m = out + "/manifest.csv";
  ASSERT_EQ(run("stats --manifest " + m + " --out " + out), 0);
  const auto counts = lines(slurp(dir.path() / "element_counts.csv"));
  ASSERT_GE(counts.size(), 2u);
  EXPECT_EQ(counts[0], "symbol,z,count,fraction");
  EXPECT_NE(slurp(dir.path() / "stats_summary.csv").find("entropy_nats,"), std::string::npos);

  const auto id = lines(slurp(dir.path() / "manifest.csv"))[1].substr(0, lines(slurp(dir.path() / "manifest.csv"))[1].find(','));
  ASSERT_EQ(run("augment-preview --manifest " + m + " --out " + out + " --id " + id +
                " --set augment.gndn_delta=0 --set augment.edge_mask=false"),
            0);
  const auto rows = lines(slurp(dir.path() / "augment_preview.csv"));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], "view,edge,i,j,d,d_noised,masked,feature_l2");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::vector<std::string> f;
    std::istringstream in(rows[r]);
    for (std::string c; std::getline(in, c, ',');)
      f.push_back(c);
    ASSERT_EQ(f.size(), 8u);
    EXPECT_EQ(f[4], f[5]) << "delta 0 leaves distances untouched";
    EXPECT_EQ(f[6], "0");
  }
  EXPECT_EQ(run("augment-preview --manifest " + m + " --out " + out + " --id nope"), 3);
}

TEST(Cli, PretrainFinetuneEvaluateEmbed) {
  TempDir dir("cli_train");
  const auto out = dir.path().string();
  const std::string small = " --set model.hidden_dim=8 --set model.n_conv=1 --set model.head_hidden=8"
                            " --set train.epochs=1 --set train.batch_size=16";
  ASSERT_EQ(run("synth --set synth.n_crystals=40 --out " + out), 0);
  const auto m = " --manifest " + out + "/manifest.csv --out " + out;
  ASSERT_EQ(run("pretrain" + m + small), 0);
  ASSERT_TRUE(std::filesystem::exists(dir.path() / "pretrain_final.ckpt"));
  EXPECT_EQ(lines(slurp(dir.path() / "pretrain_log.csv"))[0], "step,epoch,phase,loss,metric_name,metric_value");

  ASSERT_EQ(run("embed --checkpoint " + out + "/pretrain_final.ckpt" + m + small), 0);
  const auto emb = lines(slurp(dir.path() / "embeddings.csv"));
  ASSERT_GE(emb.size(), 2u);
  EXPECT_EQ(columns(emb[0]), 130u); // id, label, 128 embedding columns
  EXPECT_EQ(emb.size(), 1u + 8u);   // test split of 40

  ASSERT_EQ(run("finetune --checkpoint " + out + "/pretrain_final.ckpt" + m + small), 0);
  ASSERT_TRUE(std::filesystem::exists(dir.path() / "metrics.csv"));
  EXPECT_EQ(run("finetune --checkpoint x --no-pretrain" + m + small), 2);
  ASSERT_EQ(run("evaluate --checkpoint " + out + "/finetune_best.ckpt" + m + small), 0);
  EXPECT_NE(slurp(dir.path() / "eval_metrics.csv").find("mae"), std::string::npos);
}
