// mofill command-line front end.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mofill/error.hpp"
#include "mofill/evaluation.hpp"
#include "mofill/io.hpp"
#include "mofill/model.hpp"
#include "mofill/motion.hpp"
#include "mofill/run_config.hpp"
#include "mofill/svg.hpp"
#include "mofill/tasks.hpp"
#include "mofill/training.hpp"

namespace fs = std::filesystem;
using namespace mofill;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": '" + tok + "' is not an integer");
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

// Joint names or indices, comma separated.
std::vector<int> parse_joints(const std::string& text) {
  std::vector<int> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (!tok.empty() && std::all_of(tok.begin(), tok.end(), ::isdigit)) {
      const int j = std::stoi(tok);
      if (j >= kJoints) throw UsageError("joint index " + tok + " out of range");
      out.push_back(j);
    } else {
      out.push_back(default_skeleton().joint_index(tok));
    }
  }
  return out;
}

GapSet parse_gaps(const std::vector<std::string>& specs) {
  std::vector<Gap> gaps;
  for (const std::string& s : specs) gaps.push_back(parse_gap(s));
  return GapSet(gaps);
}

fs::path default_stats_path(const fs::path& weights) {
  fs::path p = weights;
  return p.replace_extension(".stats");
}

void require_output_dir(const fs::path& out) {
  const fs::path dir = out.parent_path();
  if (!dir.empty() && !fs::is_directory(dir))
    throw DataError("output directory " + dir.string() + " does not exist");
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
}

// *.csv clips in name order; long recordings are cut into 240-frame windows.
std::vector<PoseClip> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .csv clips in " + dir.string());
  std::vector<PoseClip> corpus;
  for (const fs::path& f : files) {
    const PoseClip clip = load_clip(f);
    if (clip.frames() < kWindow)
      throw DataError(f.string() + ": " + std::to_string(clip.frames()) +
                      " frames, training needs at least " + std::to_string(kWindow));
    for (PoseClip& w : window_clips(clip)) corpus.push_back(std::move(w));
  }
  return corpus;
}

struct Model {
  ModelWeights<float> weights;
  NormStats stats;
};

Model load_model(const std::string& weights, const std::string& stats) {
  Model m;
  m.weights = load_weights(weights);
  m.stats = load_stats(stats.empty() ? default_stats_path(weights) : fs::path(stats));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mofill: motion infilling with a convolutional autoencoder"};
  app.require_subcommand(1);

  // gen-data
  struct {
    std::string family = "corpus", out;
    int count = 8, frames = kWindow;
    std::uint64_t seed = 1;
  } gen;
  auto* cmd_gen = app.add_subcommand("gen-data", "Write synthetic clips");
  cmd_gen->add_option("--family", gen.family, "walk, run, wave, squat, idle, mixed or corpus");
  cmd_gen->add_option("--count", gen.count, "Number of clips")->check(CLI::PositiveNumber);
  cmd_gen->add_option("--frames", gen.frames, "Frames per clip")->check(CLI::Range(2, 1 << 20));
  cmd_gen->add_option("--seed", gen.seed);
  cmd_gen->add_option("--out", gen.out, "Output directory")->required();

  // train
  struct {
    std::string config, data, weights, stats, log, resume, checkpoint_dir;
    int synthetic = 0, epochs = 0, batch = 0, threads = -1, checkpoint_every = -1;
    std::optional<std::uint64_t> seed;
    bool no_curriculum = false;
  } tr;
  auto* cmd_train = app.add_subcommand("train", "Train a model");
  cmd_train->add_option("--config", tr.config, "key=value run configuration");
  auto* opt_data = cmd_train->add_option("--data", tr.data, "Directory of clip files");
  auto* opt_syn = cmd_train->add_option("--synthetic", tr.synthetic, "Train on N synthetic clips")
                      ->check(CLI::PositiveNumber);
  opt_data->excludes(opt_syn);
  cmd_train->add_option("--weights", tr.weights, "Output weights");
  cmd_train->add_option("--stats", tr.stats, "Output stats (default: next to the weights)");
  cmd_train->add_option("--log", tr.log, "Output training log CSV");
  cmd_train->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  cmd_train->add_option("--batch-size", tr.batch)->check(CLI::PositiveNumber);
  cmd_train->add_option("--seed", tr.seed);
  cmd_train->add_option("--threads", tr.threads)->check(CLI::NonNegativeNumber);
  cmd_train->add_flag("--no-curriculum", tr.no_curriculum, "Fixed 60-frame mean gap");
  cmd_train->add_option("--checkpoint-every", tr.checkpoint_every)->check(CLI::NonNegativeNumber);
  cmd_train->add_option("--checkpoint-dir", tr.checkpoint_dir);
  cmd_train->add_option("--resume", tr.resume, "Checkpoint to continue from");

  // shared model options
  struct {
    std::string clip, weights, stats, out;
    std::vector<std::string> gaps;
  } io;

  auto model_opts = [&](CLI::App* cmd) {
    cmd->add_option("--clip", io.clip, "Input clip")->required();
    cmd->add_option("--weights", io.weights, "Model weights")->required();
    cmd->add_option("--stats", io.stats, "Normalization stats (default: next to the weights)");
    cmd->add_option("--out", io.out, "Output clip")->required();
  };

  bool keep_known = false;
  auto* cmd_infill = app.add_subcommand("infill", "Fill gaps in a clip");
  model_opts(cmd_infill);
  cmd_infill->add_option("--gap", io.gaps, "start:length (repeatable)")->required();
  cmd_infill->add_flag("--keep-known", keep_known, "Copy known frames through unchanged");

  struct {
    std::string kind = "frame_drop", mask;
    double p = 0.3, sigma = 1.0;
    std::uint64_t seed = 1;
  } dn;
  auto* cmd_denoise = app.add_subcommand("denoise", "Corrupt and reconstruct a clip");
  model_opts(cmd_denoise);
  auto* opt_kind = cmd_denoise->add_option("--kind", dn.kind,
                                           "none, gap, joint_drop, frame_drop or gaussian");
  auto* opt_mask = cmd_denoise->add_option("--mask", dn.mask, "Mask file of removed entries");
  opt_kind->excludes(opt_mask);
  cmd_denoise->add_option("--p", dn.p, "Frame-drop probability")->check(CLI::Range(0.0, 1.0));
  cmd_denoise->add_option("--sigma", dn.sigma, "Noise level (normalized units)")
      ->check(CLI::NonNegativeNumber);
  cmd_denoise->add_option("--seed", dn.seed);

  std::string joints_text;
  auto* cmd_recover = app.add_subcommand("recover", "Reconstruct up to 3 missing joints");
  model_opts(cmd_recover);
  cmd_recover->add_option("--joints", joints_text, "Joint names or indices, comma separated")
      ->required();

  struct {
    std::string source, joints, at;
    int source_offset = 0;
    bool with_root = false;
  } bl;
  auto* cmd_blend = app.add_subcommand("blend", "Infill guided by joints of a third clip");
  model_opts(cmd_blend);
  cmd_blend->add_option("--gap", io.gaps, "start:length (repeatable)")->required();
  cmd_blend->add_option("--source", bl.source, "Clip providing the constraint")->required();
  cmd_blend->add_option("--joints", bl.joints, "Constrained joints");
  cmd_blend->add_option("--at", bl.at, "start:length of the constraint in the target")->required();
  cmd_blend->add_option("--source-offset", bl.source_offset, "First source frame")
      ->check(CLI::NonNegativeNumber);
  cmd_blend->add_flag("--with-root", bl.with_root, "Also constrain the root velocities");

  struct {
    std::string pred, truth, scope = "full", alignment = "root", out;
    std::string weights, stats, data, sweep, values, svg;
    std::vector<std::string> gaps;
    int gap = 80;
  } ev;
  auto* cmd_eval = app.add_subcommand("eval", "Error reports");
  auto* opt_pred = cmd_eval->add_option("--pred", ev.pred, "Predicted clip");
  auto* opt_truth = cmd_eval->add_option("--truth", ev.truth, "Ground-truth clip");
  cmd_eval->add_option("--gap", ev.gaps, "start:length (repeatable)");
  cmd_eval->add_option("--scope", ev.scope, "full or gap");
  cmd_eval->add_option("--alignment", ev.alignment, "root or global");
  auto* opt_sweep = cmd_eval->add_option("--sweep", ev.sweep, "gap, context or bones");
  cmd_eval->add_option("--weights", ev.weights);
  cmd_eval->add_option("--stats", ev.stats);
  cmd_eval->add_option("--data", ev.data, "Directory of held-out clips");
  cmd_eval->add_option("--values", ev.values, "Gap sizes or context lengths, comma separated");
  cmd_eval->add_option("--context-gap", ev.gap, "Gap size for the context sweep")
      ->check(CLI::PositiveNumber);
  cmd_eval->add_option("--svg", ev.svg, "Also write the error curve as SVG");
  cmd_eval->add_option("--out", ev.out, "Output CSV (default stdout)");
  opt_pred->needs(opt_truth);
  opt_truth->needs(opt_pred);
  opt_pred->excludes(opt_sweep);

  struct {
    std::string weights, lengths = "32,240,480,1927", out;
    int runs = 5;
  } bn;
  auto* cmd_bench = app.add_subcommand("bench", "Inference timing");
  cmd_bench->add_option("--weights", bn.weights)->required();
  cmd_bench->add_option("--lengths", bn.lengths, "Frame counts, comma separated");
  cmd_bench->add_option("--runs", bn.runs)->check(CLI::PositiveNumber);
  cmd_bench->add_option("--out", bn.out, "Output CSV (default stdout)");

  struct {
    std::string clip, out;
    std::vector<std::string> gaps;
    int stride = 10;
  } sv;
  auto* cmd_svg = app.add_subcommand("export-svg", "Stick-figure strip of a clip");
  cmd_svg->add_option("--clip", sv.clip)->required();
  cmd_svg->add_option("--gap", sv.gaps, "start:length (repeatable)");
  cmd_svg->add_option("--stride", sv.stride, "Frames between figures")->check(CLI::PositiveNumber);
  cmd_svg->add_option("--out", sv.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd_gen->parsed()) {
      if (!fs::is_directory(gen.out)) fs::create_directories(gen.out);
      std::vector<PoseClip> clips;
      if (gen.family == "corpus")
        clips = synth_corpus(gen.count, gen.seed, gen.frames);
      else
        clips = synth_generate(parse_family(gen.family), gen.count, gen.seed, gen.frames);
      for (std::size_t i = 0; i < clips.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s-%04zu.csv", gen.family.c_str(), i);
        save_clip(clips[i], fs::path(gen.out) / name);
      }
      std::cout << clips.size() << " clips written to " << gen.out << "\n";
    } else if (cmd_train->parsed()) {
      RunConfig rc;
      if (!tr.config.empty()) rc = load_run_config(tr.config);
      TrainConfig& c = rc.train;
      if (tr.epochs) c.epochs = tr.epochs;
      if (tr.batch) c.batch_size = tr.batch;
      if (tr.seed) c.seed = *tr.seed;
      if (tr.threads >= 0) c.threads = tr.threads;
      if (tr.no_curriculum) c.curriculum = false;
      if (tr.checkpoint_every >= 0) c.checkpoint_every = tr.checkpoint_every;
      if (!tr.checkpoint_dir.empty()) c.checkpoint_dir = tr.checkpoint_dir;
      if (!tr.data.empty()) rc.data = tr.data;
      if (!tr.weights.empty()) rc.weights = tr.weights;
      if (!tr.stats.empty()) rc.stats = tr.stats;
      if (!tr.log.empty()) rc.log = tr.log;
      c.validate();
      if (rc.weights.empty()) throw UsageError("train needs --weights (or weights= in the config)");
      if (rc.stats.empty()) rc.stats = default_stats_path(rc.weights);
      if (rc.data.empty() && tr.synthetic == 0)
        throw UsageError("train needs --data or --synthetic");
      // validate every path before any work
      for (const fs::path& p : {rc.weights, rc.stats, rc.log})
        if (!p.empty()) require_output_dir(p);
      if (c.checkpoint_every > 0 && !fs::is_directory(c.checkpoint_dir))
        throw DataError("checkpoint directory " + c.checkpoint_dir.string() + " does not exist");
      if (!tr.resume.empty() && !fs::exists(fs::path(tr.resume + ".weights")) &&
          !fs::exists(fs::path(tr.resume)))
        throw DataError("checkpoint " + tr.resume + " not found");

      const std::vector<PoseClip> corpus =
          tr.synthetic > 0 ? synth_corpus(tr.synthetic, c.seed) : load_corpus(rc.data);
      auto report = [](const EpochRecord& r) {
        std::fprintf(stderr, "epoch %d  mu %d  train %.5f  val %.5f  %.1fs\n", r.epoch, r.mu,
                     r.train_loss, r.val_loss, r.seconds);
      };
      const TrainResult result = tr.resume.empty() ? train(corpus, c, report)
                                                   : resume_training(corpus, c, tr.resume, report);
      save_weights(result.weights, rc.weights);
      save_stats(result.stats, rc.stats);
      if (!rc.log.empty()) write_file_atomic(rc.log, result.log.to_csv());
    } else if (cmd_infill->parsed()) {
      const GapSet gaps = parse_gaps(io.gaps);
      require_output_dir(io.out);
      const PoseClip clip = load_clip(io.clip);
      const Model m = load_model(io.weights, io.stats);
      save_clip(infill(clip, gaps, m.weights, m.stats, keep_known), io.out);
    } else if (cmd_denoise->parsed()) {
      require_output_dir(io.out);
      const PoseClip clip = load_clip(io.clip);
      const Model m = load_model(io.weights, io.stats);
      PoseClip out;
      if (!dn.mask.empty()) {
        out = denoise_masked(clip, load_mask(dn.mask), m.weights, m.stats);
      } else {
        PerturbationSpec spec;
        spec.kind = parse_perturbation(dn.kind);
        spec.drop_p = dn.p;
        spec.noise_sigma = dn.sigma;
        if (spec.kind == PerturbationKind::gap)
          throw UsageError("use the infill command for gaps");
        out = denoise(clip, spec, m.weights, m.stats, dn.seed);
      }
      save_clip(out, io.out);
    } else if (cmd_recover->parsed()) {
      const std::vector<int> joints = parse_joints(joints_text);
      require_output_dir(io.out);
      const PoseClip clip = load_clip(io.clip);
      const Model m = load_model(io.weights, io.stats);
      save_clip(recover_joints(clip, joints, m.weights, m.stats), io.out);
    } else if (cmd_blend->parsed()) {
      const GapSet gaps = parse_gaps(io.gaps);
      const Gap at = parse_gap(bl.at);
      BlendConstraint bc;
      bc.joints = parse_joints(bl.joints);
      bc.start = at.start;
      bc.length = at.length;
      bc.source_offset = bl.source_offset;
      bc.with_root = bl.with_root;
      require_output_dir(io.out);
      const PoseClip clip = load_clip(io.clip);
      bc.source = load_clip(bl.source);
      const Model m = load_model(io.weights, io.stats);
      save_clip(blend_tertiary(clip, gaps, {bc}, m.weights, m.stats), io.out);
    } else if (cmd_eval->parsed()) {
      if (!ev.out.empty() && ev.out != "-") require_output_dir(ev.out);
      if (!ev.pred.empty()) {
        const ErrorScope scope = parse_scope(ev.scope);
        Alignment align;
        if (ev.alignment == "root") align = Alignment::root_aligned;
        else if (ev.alignment == "global") align = Alignment::global;
        else throw UsageError("alignment must be root or global");
        const GapSet gaps = parse_gaps(ev.gaps);
        const ErrorReport r =
            joint_error(load_clip(ev.pred), load_clip(ev.truth), scope, gaps, align);
        emit(error_report_csv({r}), ev.out);
      } else if (!ev.sweep.empty()) {
        if (ev.data.empty()) throw UsageError("--sweep needs --data");
        if (ev.sweep == "bones") {
          // with --weights, the bone lengths of the reconstructions
          std::vector<PoseClip> clips = load_corpus(ev.data);
          if (!ev.weights.empty()) {
            const Model m = load_model(ev.weights, ev.stats);
            for (PoseClip& c : clips) c = infill(c, GapSet{}, m.weights, m.stats);
          }
          emit(bone_report_csv(bone_length_stats(clips)), ev.out);
        } else {
          if (ev.weights.empty()) throw UsageError("--sweep needs --weights");
          const Model m = load_model(ev.weights, ev.stats);
          std::vector<PoseClip> clips;
          fs::path dir = ev.data;
          if (!fs::is_directory(dir)) throw DataError("data directory " + dir.string() + " does not exist");
          std::vector<fs::path> files;
          for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".csv") files.push_back(e.path());
          std::sort(files.begin(), files.end());
          for (const auto& f : files) clips.push_back(load_clip(f));
          if (clips.empty()) throw DataError("no .csv clips in " + dir.string());
          std::vector<SweepRow> rows;
          std::string param;
          if (ev.sweep == "gap") {
            param = "gap";
            rows = sweep_gaps(m.weights, m.stats, clips,
                              parse_int_list(ev.values.empty() ? "0,5,20,60,80,120" : ev.values, "--values"));
          } else if (ev.sweep == "context") {
            param = "context";
            rows = sweep_context(m.weights, m.stats, clips,
                                 parse_int_list(ev.values.empty() ? "1,5,10,25,50" : ev.values, "--values"),
                                 ev.gap);
          } else {
            throw UsageError("--sweep must be gap, context or bones");
          }
          emit(sweep_csv(rows, param), ev.out);
          if (!ev.svg.empty()) write_file_atomic(ev.svg, error_curve_svg(rows, param + " (frames)"));
        }
      } else {
        throw UsageError("eval needs --pred/--truth or --sweep");
      }
    } else if (cmd_bench->parsed()) {
      const std::vector<int> lengths = parse_int_list(bn.lengths, "--lengths");
      if (!bn.out.empty() && bn.out != "-") require_output_dir(bn.out);
      const ModelWeights<float> w = load_weights(bn.weights);
      emit(bench_csv(benchmark_inference(w, lengths, bn.runs)), bn.out);
    } else if (cmd_svg->parsed()) {
      const GapSet gaps = parse_gaps(sv.gaps);
      SvgOptions opt;
      opt.stride = sv.stride;
      export_svg(load_clip(sv.clip), gaps, sv.out, opt);
    }
  } catch (const UsageError& e) {
    std::cerr << "mofill: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "mofill: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
