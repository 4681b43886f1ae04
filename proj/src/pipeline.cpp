#include "spend/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "spend/config.hpp"
#include "spend/cubeio.hpp"
#include "spend/metrics.hpp"
#include "spend/nnet/checkpoint.hpp"
#include "spend/nnet/train.hpp"
#include "spend/noisestats.hpp"
#include "spend/parallel.hpp"
#include "spend/permute.hpp"
#include "spend/png.hpp"
#include "spend/synth.hpp"
#include "spend/unmix.hpp"

namespace spend::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

PipelineConfig load_pipeline_config(const fs::path& path) {
  const json j = config::read_json(path);
  config::check_keys(j,
                     {"version", "seed", "phantom", "noise", "train", "output_dir", "permute_axis",
                      "unmix_lambda", "thresholds", "verbosity"},
                     "pipeline config");
  config::check_version(j, 1, "pipeline config");
  const fs::path base = path.parent_path();
  const auto resolve = [&](const char* key) {
    if (!j.contains(key)) throw Error("pipeline config: missing \"" + std::string(key) + "\"");
    const fs::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  PipelineConfig c;
  c.phantom = resolve("phantom");
  c.noise = resolve("noise");
  c.train = resolve("train");
  c.output_dir = resolve("output_dir");
  c.seed = j.at("seed").get<std::uint64_t>();
  const std::string axis = config::get_or<std::string>(j, "permute_axis", "auto");
  if (axis != "auto") c.permute_axis = parse_axis(axis);
  c.unmix_lambda = config::get_or(j, "unmix_lambda", 0.0);
  c.verbosity = config::get_or(j, "verbosity", 1);
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    config::check_keys(t, {"snr_gain", "mse_ratio", "frechet_ratio"}, "pipeline thresholds");
    c.thresholds.snr_gain = config::get_or(t, "snr_gain", c.thresholds.snr_gain);
    c.thresholds.mse_ratio = config::get_or(t, "mse_ratio", c.thresholds.mse_ratio);
    c.thresholds.frechet_ratio = config::get_or(t, "frechet_ratio", c.thresholds.frechet_ratio);
  }
  return c;
}

namespace {

template <class F>
auto stage(const char* name, int verbosity, F&& body) -> decltype(body()) {
  if (verbosity > 0) std::fprintf(stderr, "[spend] %s\n", name);
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

json read_spec(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw Error(std::string(what) + " not found: " + p.string());
  return config::read_json(p);
}

Image band_sum(const HyperCube& c) {
  Image im(c.nx(), c.ny());
  for (std::size_t p = 0; p < c.nx() * c.ny(); ++p) {
    double s = 0;
    for (float v : c.spectrum(p / c.ny(), p % c.ny())) s += v;
    im.data()[p] = static_cast<float>(s);
  }
  im.pixel_size_nm = c.pixel_size_nm;
  return im;
}

double rms_diff(const Matrix& a, const Matrix& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.data().size()));
}

json frc_json(const metrics::FrcCurve& f) {
  json j{{"cutoff_frequency", f.cutoff_frequency},
         {"cutoff_found", f.cutoff_found},
         {"resolution_px", f.resolution_px}};
  if (f.resolution_nm) j["resolution_nm"] = *f.resolution_nm;
  return j;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  const int v = cfg.verbosity;
  json report;
  report["version"] = 1;
  report["seed"] = cfg.seed;
  fs::create_directories(cfg.output_dir);
  const fs::path out = cfg.output_dir;

  // synth
  synth::PhantomSpec pspec;
  synth::NoiseSpec nspec;
  synth::Phantom ph;
  HyperCube noisy;
  stage("synth", v, [&] {
    pspec = synth::phantom_from_json(read_spec(cfg.phantom, "phantom spec"));
    nspec = synth::noise_from_json(read_spec(cfg.noise, "noise spec"));
    nspec.seed = derive_seed(cfg.seed, 1);
    ph = synth::make_phantom(pspec);
    noisy = synth::corrupt(ph.clean, nspec);
    save_cube(ph.clean, out / "clean", cfg.seed);
    save_cube(noisy, out / "noisy", cfg.seed);
    report["synth"] = {{"phantom", synth::phantom_to_json(pspec)},
                       {"noise", synth::noise_to_json(nspec)},
                       {"clean_crc32", payload_crc32(ph.clean)},
                       {"noisy_crc32", payload_crc32(noisy)}};
  });

  // analyze
  Axis axis = Axis::W;
  stage("analyze", v, [&] {
    auto [selected, rep] = noisestats::select_permutation_axis(noisy);
    config::write_json(out / "noise_report.json", noisestats::report_to_json(rep));
    axis = cfg.permute_axis.value_or(selected);
    report["analyze"] = {{"selected_axis", std::string(axis_name(selected))},
                         {"fluctuation", rep.fluctuation},
                         {"pcc", rep.pcc},
                         {"noise_vs_signal_slope", rep.noise_vs_signal_fit.slope}};
  });

  // permute
  permute::PairSet pairs;
  stage("permute", v, [&] {
    pairs = permute::split_permute(noisy, axis);
    save_cube(pairs.input, out / "pairs_input", cfg.seed);
    save_cube(pairs.target, out / "pairs_target", cfg.seed);
    config::write_json(out / "pairs_meta.json", permute::meta_to_json(pairs));
    report["permute"] = {{"axis", std::string(axis_name(axis))},
                         {"source", cfg.permute_axis ? "config" : "auto"},
                         {"pairs", pairs.input.extent(axis)},
                         {"parity_dropped", pairs.parity_dropped}};
  });

  // train
  nnet::DenoiserModel model;
  stage("train", v, [&] {
    const json tj = read_spec(cfg.train, "train config");
    nnet::TrainConfig tc = nnet::train_config_from_json(tj);
    nnet::ModelConfig mc = nnet::model_config_from_json(tj.value("model", json::object()));
    mc.seed = derive_seed(cfg.seed, 2);
    tc.seed = derive_seed(cfg.seed, 3);
    model = nnet::build_model(mc);
    model = nnet::train(std::move(model), pairs, tc, [&](const nnet::EpochRecord& r) {
      if (v > 1 || (v > 0 && (r.epoch % 10 == 0 || r.epoch == 1))) {
        std::fprintf(stderr, "[spend]   epoch %d train %.6g val %.6g\n", r.epoch, r.train_loss,
                     r.val_loss);
      }
    });
    nnet::save_checkpoint(model, out / "model.ckpt");
    auto best = std::min_element(model.history.begin(), model.history.end(),
                                 [](const auto& a, const auto& b) { return a.val_loss < b.val_loss; });
    report["train"] = {{"model", nnet::model_config_to_json(mc)},
                       {"train", nnet::train_config_to_json(tc)},
                       {"parameters", model.params.size()},
                       {"epochs_run", model.history.size()},
                       {"diverged", model.diverged},
                       {"best_epoch", best == model.history.end() ? 0 : best->epoch},
                       {"best_val_loss", best == model.history.end() ? 0.0 : best->val_loss},
                       {"final_train_loss", model.history.empty() ? 0.0 : model.history.back().train_loss}};
  });

  // denoise
  HyperCube denoised;
  stage("denoise", v, [&] {
    denoised = nnet::predict(model, noisy);
    save_cube(denoised, out / "denoised", cfg.seed);
    report["denoise"] = {{"crc32", payload_crc32(denoised)}};
  });

  // unmix
  stage("unmix", v, [&] {
    const auto raw_fit = lasso_unmix(reshape_cube(noisy), ph.truth.S, cfg.unmix_lambda);
    const auto den_fit = lasso_unmix(reshape_cube(denoised), ph.truth.S, cfg.unmix_lambda);
    save_cube(maps_to_cube(den_fit.C, noisy.nx(), noisy.ny()), out / "maps_denoised", cfg.seed);
    report["unmix"] = {{"method", "lasso"},
                       {"lambda", cfg.unmix_lambda},
                       {"c_rmse_raw", rms_diff(raw_fit.C, ph.truth.C)},
                       {"c_rmse_denoised", rms_diff(den_fit.C, ph.truth.C)}};
  });

  // metrics
  bool passed = false;
  stage("metrics", v, [&] {
    const std::size_t P = noisy.nx() * noisy.ny();
    std::vector<double> csum(P, 0.0);
    double cmax = 0;
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t k = 0; k < ph.truth.K; ++k) csum[p] += ph.truth.C(p, k);
      cmax = std::max(cmax, csum[p]);
    }
    std::vector<std::size_t> sig, bg;
    for (std::size_t p = 0; p < P; ++p) {
      if (csum[p] >= 0.5 * cmax && cmax > 0) sig.push_back(p);
      if (csum[p] == 0) bg.push_back(p);
    }
    const double gain = metrics::snr_gain(noisy, denoised, sig, bg);
    const double mse_raw = metrics::mse(noisy, ph.clean);
    const double mse_den = metrics::mse(denoised, ph.clean);
    const auto fr_raw = metrics::spectral_distortion_map(noisy, ph.clean);
    const auto fr_den = metrics::spectral_distortion_map(denoised, ph.clean);
    const Image clean_img = band_sum(ph.clean), raw_img = band_sum(noisy),
                den_img = band_sum(denoised);
    const auto frc_raw = metrics::frc_resolution(raw_img, clean_img);
    const auto frc_den = metrics::frc_resolution(den_img, clean_img);

    const double mse_ratio = mse_den / mse_raw;
    const double fr_ratio = fr_den.mean / fr_raw.mean;
    passed = gain >= cfg.thresholds.snr_gain && mse_ratio <= cfg.thresholds.mse_ratio &&
             fr_ratio <= cfg.thresholds.frechet_ratio && !model.diverged;
    report["metrics"] = {
        {"signal_roi_pixels", sig.size()},
        {"background_roi_pixels", bg.size()},
        {"snr_raw", metrics::snr(noisy, sig, bg)},
        {"snr_denoised", metrics::snr(denoised, sig, bg)},
        {"snr_gain", gain},
        {"mse_raw", mse_raw},
        {"mse_denoised", mse_den},
        {"mse_ratio", mse_ratio},
        {"frechet_raw", fr_raw.mean},
        {"frechet_denoised", fr_den.mean},
        {"frechet_ratio", fr_ratio},
        {"ssim_raw", metrics::ssim(clean_img, raw_img)},
        {"ssim_denoised", metrics::ssim(clean_img, den_img)},
        {"psnr_raw", metrics::psnr(clean_img, raw_img)},
        {"psnr_denoised", metrics::psnr(clean_img, den_img)},
        {"frc_raw", frc_json(frc_raw)},
        {"frc_denoised", frc_json(frc_den)}};
    report["thresholds"] = {{"snr_gain", cfg.thresholds.snr_gain},
                            {"mse_ratio", cfg.thresholds.mse_ratio},
                            {"frechet_ratio", cfg.thresholds.frechet_ratio}};
    report["passed"] = passed;

    const std::size_t peak = noisy.nw() / 2;
    png::write_image(out / "preview_noisy.png", slice_frame(noisy, Axis::W, peak));
    png::write_image(out / "preview_denoised.png", slice_frame(denoised, Axis::W, peak));
    png::write_image(out / "preview_clean.png", slice_frame(ph.clean, Axis::W, peak));
    std::vector<std::pair<double, double>> curve;
    for (std::size_t r = 0; r < frc_den.frequency.size(); ++r) {
      curve.emplace_back(frc_den.frequency[r], frc_den.smoothed[r]);
    }
    png::write_curve(out / "frc_denoised.png", curve, 0.5, 0.0, 1.0);
    const auto phasor = spectral_phasor(denoised);
    std::vector<std::pair<double, double>> pts;
    for (std::size_t p = 0; p < P; ++p) {
      if (!phasor.dark[p]) pts.emplace_back(phasor.g[p], phasor.s[p]);
    }
    png::write_scatter(out / "phasor_denoised.png", pts, -1.0, 1.0);
  });

  config::write_json(out / "report.json", report);
  return {report, passed};
}

}  // namespace spend::pipeline
