// Command-line front end: pretraining, fine-tuning, evaluation, probes and
// synthetic data export.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vlc/pipeline.hpp"
#include "vlc/runtime.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::size_t> seed;
  std::string out = "run";
  std::vector<std::string> overrides;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value settings file");
  cmd->add_option("--seed", c.seed, "overrides train.seed");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--set", c.overrides, "extra key=value setting, applied after --config");
  cmd->add_flag("--quiet", c.quiet, "log to the run directory only");
}

vlc::RunConfig resolve(const Common& c, vlc::RunConfig base = {}) {
  vlc::RunConfig cfg = c.config.empty() ? base : vlc::load_config(c.config, base);
  std::string extra;
  for (const auto& kv : c.overrides) extra += kv + "\n";
  cfg = vlc::parse_config_string(extra, cfg);
  if (c.seed) cfg.seed = *c.seed;
  vlc::validate(cfg);
  return cfg;
}

// Settings stored in a checkpoint, then --config and --set on top.
vlc::RunConfig resolve_from(const Common& c, const vlc::Checkpoint& ck) { return resolve(c, vlc::config_from(ck)); }

void print_metrics(const vlc::Metrics& m) {
  for (const auto& [k, v] : m) std::cout << k << '\t' << vlc::format_value(v) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  vlc::tune_allocator();
  CLI::App app{"vision-language pretraining with merged attention and masked image modeling"};
  app.require_subcommand(1);

  Common pre, mim, fin, ev, pr, gen;
  std::string resume, mim_resume, task, probe, checkpoint, probe_checkpoint, ext = ".png";

  auto* c_pre = app.add_subcommand("pretrain", "joint MLM + ITM + MIM pretraining");
  add_common(c_pre, pre);
  c_pre->add_option("--resume", resume, "checkpoint of an interrupted run");

  auto* c_mim = app.add_subcommand("pretrain-mim", "image-only masked reconstruction (warm start)");
  add_common(c_mim, mim);
  c_mim->add_option("--resume", mim_resume, "checkpoint of an interrupted run");

  auto* c_fin = app.add_subcommand("finetune", "fine-tune a task head on top of the encoder");
  add_common(c_fin, fin);
  c_fin->add_option("task", task, "vqa, nlvr or retrieval")->required()->check(CLI::IsMember({"vqa", "nlvr", "retrieval"}));
  std::string init;
  c_fin->add_option("--init", init, "pretrained checkpoint (same as train.init)");

  auto* c_ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(c_ev, ev);
  c_ev->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required();

  auto* c_pr = app.add_subcommand("probe", "alignment heatmaps, patch clusters, noun similarity");
  add_common(c_pr, pr);
  c_pr->add_option("kind", probe, "heatmap, cluster or nounsim")->required()->check(CLI::IsMember({"heatmap", "cluster", "nounsim"}));
  c_pr->add_option("--checkpoint", probe_checkpoint, "checkpoint to probe")->required();

  auto* c_gen = app.add_subcommand("gen-data", "write the synthetic set as images plus a JSONL manifest");
  add_common(c_gen, gen);
  c_gen->add_option("--ext", ext, "image format: .png, .ppm or .pgm")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_pre) {
      vlc::RunOptions opt{pre.out, std::nullopt, !pre.quiet};
      if (!resume.empty()) opt.resume = resume;
      vlc::run_pretrain(resolve(pre), opt, vlc::PretrainMode::kJoint);
    } else if (*c_mim) {
      vlc::RunOptions opt{mim.out, std::nullopt, !mim.quiet};
      if (!mim_resume.empty()) opt.resume = mim_resume;
      vlc::run_pretrain(resolve(mim), opt, vlc::PretrainMode::kMimOnly);
    } else if (*c_fin) {
      auto cfg = resolve(fin);
      if (!init.empty()) cfg.init = init;
      vlc::run_finetune(vlc::parse_task(task), cfg, {fin.out, std::nullopt, !fin.quiet});
    } else if (*c_ev) {
      const auto ck = vlc::load_checkpoint(checkpoint);
      print_metrics(vlc::run_eval(ck, resolve_from(ev, ck), ev.out));
    } else if (*c_pr) {
      const auto ck = vlc::load_checkpoint(probe_checkpoint);
      print_metrics(vlc::run_probe(vlc::parse_probe(probe), ck, resolve_from(pr, ck), pr.out));
    } else if (*c_gen) {
      std::cout << vlc::run_gen_data(resolve(gen), gen.out, ext).string() << '\n';
    }
  } catch (const vlc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
