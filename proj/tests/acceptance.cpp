// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fail.
// MOFILL_ACCEPTANCE_CACHE=<dir> reuses (or stores) the desk training run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include "mofill/evaluation.hpp"
#include "mofill/gradcheck.hpp"
#include "mofill/io.hpp"
#include "mofill/kernels.hpp"
#include "mofill/training.hpp"
#include "test_util.hpp"

using namespace mofill;
using test::random_tensor;
using test::random_vector;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what) {
  std::printf("[%s] AC%-2d %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs fn and reports a thrown exception as a failure of criterion `id`.
void guarded(int id, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(id, false, std::string("threw: ") + e.what());
  }
}

std::size_t kink_refinements = 0;

double check(const DifferentiableOp& op, const TensorD& x, std::uint64_t seed,
             std::size_t entries = 0) {
  GradCheckOptions o;
  o.seed = seed;
  o.max_entries = entries;
  const GradCheckResult r = finite_difference_check(op, x, 1e-6, o);
  kink_refinements += r.refined;
  return r.max_rel_error;
}

void ac1_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  auto note = [&](double e) { worst = std::max(worst, e); };
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (int stride : {1, 2}) {
      const ConvSpec spec{3, 2, stride, stride};
      const auto x = random_tensor<double>({1, 2, 9, 11}, seed);
      const auto w = random_tensor<double>({3, 2, 3, 3}, seed + 10);
      const auto b = random_vector<double>(3, seed + 20);
      note(check({[&](const TensorD& in) { return conv2d_forward<double>(in, spec, w, b); },
                  [&](const TensorD& in, const TensorD& g) {
                    return conv2d_backward<double>(g, in, spec, w).input;
                  }},
                 x, seed));
      note(check({[&](const TensorD& ww) { return conv2d_forward<double>(x, spec, ww, b); },
                  [&](const TensorD& ww, const TensorD& g) {
                    return conv2d_backward<double>(g, x, spec, ww).weights;
                  }},
                 w, seed));
    }
    const ConvSpec tspec{2, 3, 2, 2};
    const auto tx = random_tensor<double>({1, 3, 5, 6}, seed);
    const auto tw = random_tensor<double>({3, 2, 3, 3}, seed + 30);
    const auto tb = random_vector<double>(2, seed + 40);
    const Size2 target{9, 11};
    note(check({[&](const TensorD& in) { return convtranspose2d_forward<double>(in, tspec, tw, tb, target); },
                [&](const TensorD& in, const TensorD& g) {
                  return convtranspose2d_backward<double>(g, in, tspec, tw).input;
                }},
               tx, seed));
    note(check({[&](const TensorD& ww) { return convtranspose2d_forward<double>(tx, tspec, ww, tb, target); },
                [&](const TensorD& ww, const TensorD& g) {
                  return convtranspose2d_backward<double>(g, tx, tspec, ww).weights;
                }},
               tw, seed));
    const auto px = random_tensor<double>({1, 2, 7, 9}, seed + 50);
    note(check({[](const TensorD& in) { return maxpool2d_forward<double>(in).output; },
                [](const TensorD& in, const TensorD& g) {
                  return maxpool2d_backward<double>(g, maxpool2d_forward<double>(in).index);
                }},
               px, seed));
    auto lx = random_tensor<double>({1, 2, 5, 7}, seed + 60);
    for (double& v : lx.values())
      if (std::fabs(v) < 0.01) v = 0.5;
    note(check({[](const TensorD& in) { return leaky_relu_forward(in, 0.2); },
                [](const TensorD& in, const TensorD& g) { return leaky_relu_backward(g, in, 0.2); }},
               lx, seed));

    // full five-unit model at the default width
    const auto w = build_model<double>(ModelConfig{}, seed);
    const auto x = random_tensor<double>({1, 1, 69, 32}, seed + 70);
    note(check({[&](const TensorD& in) { return model_forward(w, in); },
                [&](const TensorD& in, const TensorD& g) {
                  ForwardCache<double> cache;
                  model_forward(w, in, &cache);
                  auto grads = make_grads(w);
                  TensorD gi;
                  model_backward(w, cache, g, grads, &gi);
                  return gi;
                }},
               x, seed, 10));
    for (std::size_t l : {std::size_t{0}, std::size_t{9}, std::size_t{19}}) {
      auto wl = w;
      note(check({[&](const TensorD& p) {
                    wl.layers[l].weights = p;
                    return model_forward(wl, x);
                  },
                  [&](const TensorD& p, const TensorD& g) {
                    wl.layers[l].weights = p;
                    ForwardCache<double> cache;
                    model_forward(wl, x, &cache);
                    auto grads = make_grads(wl);
                    model_backward(wl, cache, g, grads);
                    return grads[l].weights;
                  }},
                 w.layers[l].weights, seed, 10));
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst < 1e-4 && secs < 120.0,
         fmt("gradient suite: max rel error %.2e (< 1e-4), 5 seeds, %zu kink step refinements, %.1f s (< 120 s)",
             worst, kink_refinements, secs));
}

void ac2_oracles() {
  Rng rng(2024);
  double conv = 0.0, convt = 0.0, pool = 0.0, adj = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int n = static_cast<int>(rng.uniform_int(1, 2));
    const int cin = static_cast<int>(rng.uniform_int(1, 4));
    const int cout = static_cast<int>(rng.uniform_int(1, 4));
    const int h = static_cast<int>(rng.uniform_int(1, 10));
    const int wd = static_cast<int>(rng.uniform_int(1, 12));
    const int sh = static_cast<int>(rng.uniform_int(1, 2));
    const int sw = static_cast<int>(rng.uniform_int(1, 2));
    const ConvSpec spec{cout, cin, sh, sw};
    const auto x = random_tensor<double>({n, cin, h, wd}, 10 + k);
    const auto w = random_tensor<double>({cout, cin, 3, 3}, 200 + k);
    const auto b = random_vector<double>(cout, 400 + k);
    conv = std::max(conv, test::max_abs_diff(conv2d_forward<double>(x, spec, w, b),
                                             test::oracle_conv(x, w, b, sh, sw)));
    const int oh = test::ceil_div(h, sh), ow = test::ceil_div(wd, sw);
    const auto y = random_tensor<double>({n, cout, oh, ow}, 600 + k);
    const auto tw = random_tensor<double>({cout, cin, 3, 3}, 800 + k);
    const auto tb = random_vector<double>(cin, 900 + k);
    const ConvSpec tspec{cin, cout, sh, sw};
    convt = std::max(convt, test::max_abs_diff(convtranspose2d_forward<double>(y, tspec, tw, tb, Size2{h, wd}),
                                               test::oracle_conv_transpose(y, tw, tb, sh, sw, h, wd)));
    pool = std::max(pool, test::max_abs_diff(maxpool2d_forward<double>(x).output, test::oracle_maxpool(x)));
    const double lhs = dot(conv2d_forward<double>(x, spec, w, {}), y);
    const double rhs = dot(x, convtranspose2d_forward<double>(y, tspec, w, {}, Size2{h, wd}));
    adj = std::max(adj, std::fabs(lhs - rhs) / std::max(1.0, std::fabs(lhs)));
  }
  report(2, conv < 1e-6 && convt < 1e-6 && pool < 1e-6 && adj < 1e-5,
         fmt("oracles on 100 shapes: conv %.1e, convT %.1e, pool %.1e (< 1e-6); adjoint %.1e (< 1e-5)",
             conv, convt, pool, adj));
}

void ac3_shapes() {
  const auto w = build_model<float>(ModelConfig{}, 1);
  const auto enc = encode(Tensor4<float>(1, 1, 69, 240), w);
  const std::vector<Size2> trace{{69, 240}, {35, 120}, {18, 60}, {9, 30}, {5, 15}};
  const Shape4 b = enc.bottleneck.shape();
  std::string got;
  for (const Size2& s : enc.plan.level_sizes) got += fmt("(%d,%d)", s.h, s.w);
  got += fmt("->(%d,%d)x%d", b.h, b.w, b.c);
  report(3, enc.plan.level_sizes == trace && b == (Shape4{1, 256, 3, 8}),
         "shape trace " + got + ", bottleneck 3x8x256");
}

void ac4_curriculum() {
  const bool ok = curriculum_mu(0) == 10 && curriculum_mu(5) == 20 && curriculum_mu(55) == 120 &&
                  curriculum_mu(80) == 120 && curriculum_mu(4) == 10 && curriculum_mu(54) == 110;
  report(4, ok, fmt("curriculum mu: e0 %d, e5 %d, e55 %d, e80 %d", curriculum_mu(0), curriculum_mu(5),
                    curriculum_mu(55), curriculum_mu(80)));
}

struct DeskModel {
  ModelWeights<float> weights;
  NormStats stats;
  TrainLog log;
  double seconds = 0.0;
  bool cached = false;
};

DeskModel desk_run() {
  TrainConfig c;
  c.epochs = 30;
  c.batch_size = 16;
  c.seed = 1;
  DeskModel d;
  const char* cache = std::getenv("MOFILL_ACCEPTANCE_CACHE");
  const fs::path dir = cache ? fs::path(cache) : fs::path();
  if (cache && fs::exists(dir / "desk.log.csv")) {
    d.weights = load_weights(dir / "desk.weights");
    d.stats = load_stats(dir / "desk.stats");
    d.log = TrainLog::from_csv(read_file_text(dir / "desk.log.csv"));
    for (const EpochRecord& r : d.log.epochs) d.seconds += r.seconds;
    d.cached = true;
    return d;
  }
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r = train(synth_corpus(512, 7), c, [](const EpochRecord& e) {
    std::printf("       epoch %2d  mu %3d  train %.5f  val %.5f  %.1f s\n", e.epoch, e.mu,
                e.train_loss, e.val_loss, e.seconds);
    std::fflush(stdout);
  });
  d.seconds = seconds_since(t0);
  d.weights = std::move(r.weights);
  d.stats = std::move(r.stats);
  d.log = std::move(r.log);
  if (cache) {
    fs::create_directories(dir);
    save_weights(d.weights, dir / "desk.weights");
    save_stats(d.stats, dir / "desk.stats");
    write_file_atomic(dir / "desk.log.csv", d.log.to_csv());
  }
  return d;
}

void ac5_training(const DeskModel& d) {
  // smoothed = mean over consecutive 5-epoch blocks
  std::vector<double> blocks;
  for (std::size_t i = 0; i + 5 <= d.log.epochs.size(); i += 5) {
    double s = 0.0;
    for (std::size_t k = i; k < i + 5; ++k) s += d.log.epochs[k].train_loss;
    blocks.push_back(s / 5.0);
  }
  bool decreasing = blocks.size() == 6;
  std::string text;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    text += fmt(i ? " > %.4f" : "%.4f", blocks[i]);
    if (i && !(blocks[i] < blocks[i - 1])) decreasing = false;
  }
  report(5, decreasing && d.seconds < 1800.0,
         fmt("desk run 512 clips x 30 epochs in %.0f s%s (< 1800 s), 5-epoch loss means ", d.seconds,
             d.cached ? " (cached)" : "") +
             text);
}

void ac6_to_8_and_10(const DeskModel& d, const std::vector<PoseClip>& held_out) {
  guarded(6, [&] {
    const SweepRow r = sweep_gaps(d.weights, d.stats, held_out, {60})[0];
    report(6, r.model.mean < r.interp.mean,
           fmt("60-frame gap on %zu held-out clips: model %.3f cm < interpolation %.3f cm",
               held_out.size(), r.model.mean, r.interp.mean));
  });
  guarded(7, [&] {
    const auto rows = sweep_gaps(d.weights, d.stats, held_out, {0, 60, 120});
    const double a = rows[0].model.mean, b = rows[1].model.mean, c = rows[2].model.mean;
    report(7, a <= b && b <= c, fmt("error by gap size: 0 -> %.3f <= 60 -> %.3f <= 120 -> %.3f cm", a, b, c));
  });
  guarded(8, [&] {
    ErrorAccumulator model, mean;
    for (std::size_t i = 0; i < held_out.size(); ++i) {
      const PoseClip& c = held_out[i];
      const FeatureMask m = sample_frame_drop_mask(c.frames(), 0.3, derive_seed(8, i));
      accumulate_joint_error(model, denoise_masked(c, m, d.weights, d.stats), c, ErrorScope::full, {});
      accumulate_joint_error(mean, leave_at_mean(c, m, d.stats), c, ErrorScope::full, {});
    }
    const double a = model.report(ErrorScope::full, Alignment::root_aligned).mean;
    const double b = mean.report(ErrorScope::full, Alignment::root_aligned).mean;
    report(8, a < b, fmt("frame drop p=0.3: model %.3f cm < leave-at-mean %.3f cm", a, b));
  });
  guarded(10, [&] {
    std::vector<PoseClip> recon;
    for (const PoseClip& c : held_out) recon.push_back(infill(c, GapSet{}, d.weights, d.stats));
    double worst_med = 0.0, worst_iqr = 0.0;
    std::string worst_name;
    for (const BoneReport& b : bone_length_stats(recon)) {
      const double med = std::fabs(b.median - b.rig_length) / b.rig_length;
      const double iqr = b.iqr() / b.rig_length;
      if (std::max(med, iqr) > std::max(worst_med, worst_iqr)) worst_name = b.name;
      worst_med = std::max(worst_med, med);
      worst_iqr = std::max(worst_iqr, iqr);
    }
    report(10, worst_med < 0.1 && worst_iqr < 0.1,
           fmt("bone lengths: worst median offset %.1f%%, worst IQR %.1f%% of rig (< 10%%), worst bone ",
               100 * worst_med, 100 * worst_iqr) +
               worst_name);
  });
}

void ac9_lengths() {
  const auto w = build_model<float>(ModelConfig{}, 1);
  bool ok = true;
  double t1927 = 0.0;
  std::string text;
  for (int frames : {32, 240, 480, 1927}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto y = forward(Tensor4<float>(1, 1, 69, frames), w);
    const double s = seconds_since(t0);
    ok = ok && y.w() == frames && y.h() == 69;
    if (frames == 1927) t1927 = s;
    text += fmt(" %d->%d", frames, y.w());
  }
  report(9, ok && t1927 < 10.0, "variable length:" + text + fmt(", T=1927 single pass %.2f s (< 10 s)", t1927));
}

void ac11_sampler() {
  CurriculumState s;
  s.mu = 60;
  double sum = 0.0;
  bool inside = true;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const GapSample g = sample_gap_mask(240, s, derive_seed(11, static_cast<std::uint64_t>(i)));
    sum += g.length;
    inside = inside && g.start >= 0 && g.start + g.length <= 240 && g.length >= 1;
    for (int t = 0; t < 240; ++t)
      if ((t >= g.start && t < g.start + g.length) == (g.mask.at(0, t) != 0)) inside = false;
  }
  const double mean = sum / draws;
  report(11, std::fabs(mean - 60.0) <= 0.05 * 60.0 && inside,
         fmt("gap sampler: mean lambda %.3f over %d draws (60 +/- 3), columns within [0,240): %s", mean,
             draws, inside ? "yes" : "no"));
}

void ac12_round_trips() {
  const auto clips = synth_corpus(8, 12);
  const NormStats st = compute_norm_stats(clips);
  double norm = 0.0;
  for (const PoseClip& c : clips) {
    const PoseClip r = denormalize(normalize(c, st), st);
    for (std::size_t i = 0; i < c.values().size(); ++i)
      norm = std::max(norm, std::fabs(r.values()[i] - c.values()[i]));
  }
  const fs::path dir = test::temp_dir("acceptance");
  ModelConfig small;
  small.channels = {4, 8, 8, 16, 256};
  const auto w = build_model<float>(small, 3);
  save_weights(w, dir / "w.weights");
  const auto loaded = load_weights(dir / "w.weights");
  save_weights(loaded, dir / "w2.weights");
  const bool weights_same = read_file_bytes(dir / "w.weights") == read_file_bytes(dir / "w2.weights") &&
                            serialize_weights(loaded) == serialize_weights(w);
  save_clip(clips[0], dir / "c.csv");
  const bool clip_same = load_clip(dir / "c.csv") == clips[0];
  report(12, norm < 1e-6 && weights_same && clip_same,
         fmt("round trips: normalize %.1e (< 1e-6), weights byte-identical %s, clip value-identical %s", norm,
             weights_same ? "yes" : "no", clip_same ? "yes" : "no"));
}

}  // namespace

int main() {
  guarded(1, ac1_gradients);
  guarded(2, ac2_oracles);
  guarded(3, ac3_shapes);
  guarded(4, ac4_curriculum);
  guarded(9, ac9_lengths);
  guarded(11, ac11_sampler);
  guarded(12, ac12_round_trips);
  try {
    const DeskModel d = desk_run();
    ac5_training(d);
    ac6_to_8_and_10(d, synth_corpus(64, 99));
  } catch (const std::exception& e) {
    for (int id : {5, 6, 7, 8, 10}) report(id, false, std::string("desk run failed: ") + e.what());
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
