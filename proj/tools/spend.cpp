// Command-line front end. Each subcommand loads its inputs, calls the
// library, and writes the results; no numerics live here.

#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spend/baseline.hpp"
#include "spend/config.hpp"
#include "spend/csv.hpp"
#include "spend/cubeio.hpp"
#include "spend/metrics.hpp"
#include "spend/nnet/checkpoint.hpp"
#include "spend/nnet/train.hpp"
#include "spend/noisestats.hpp"
#include "spend/parallel.hpp"
#include "spend/permute.hpp"
#include "spend/pipeline.hpp"
#include "spend/png.hpp"
#include "spend/synth.hpp"
#include "spend/unmix.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spend;

namespace {

std::vector<double> spectral_axis(const HyperCube& c) {
  if (c.wavenumbers) return *c.wavenumbers;
  std::vector<double> idx(c.nw());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<double>(k);
  return idx;
}

SpectraTable spectra_of(const Matrix& S, std::vector<double> axis) {
  SpectraTable t{std::move(axis), {}};
  for (std::size_t k = 0; k < S.rows(); ++k) {
    t.rows.emplace_back(S.row(k).begin(), S.row(k).end());
  }
  return t;
}

Matrix matrix_of(const SpectraTable& t) {
  Matrix S(t.rows.size(), t.wavenumbers.size());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    std::copy(t.rows[k].begin(), t.rows[k].end(), S.row(k).begin());
  }
  return S;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// ROI file: {"signal": [...], "background": [...]}, entries either raster
// indices (x * ny + y) or [x, y] pairs.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> read_rois(const fs::path& path,
                                                                        std::size_t ny) {
  const json j = config::read_json(path);
  config::check_keys(j, {"version", "signal", "background"}, "roi file");
  const auto parse = [&](const char* key) {
    std::vector<std::size_t> out;
    for (const auto& e : j.at(key)) {
      out.push_back(e.is_array() ? e.at(0).get<std::size_t>() * ny + e.at(1).get<std::size_t>()
                                 : e.get<std::size_t>());
    }
    return out;
  };
  return {parse("signal"), parse("background")};
}

Image frame_or_sum(const HyperCube& c, int frame) {
  if (frame >= 0) return slice_frame(c, Axis::W, static_cast<std::size_t>(frame));
  Image im(c.nx(), c.ny());
  for (std::size_t p = 0; p < c.nx() * c.ny(); ++p) {
    double s = 0;
    for (float v : c.spectrum(p / c.ny(), p % c.ny())) s += v;
    im.data()[p] = static_cast<float>(s);
  }
  im.pixel_size_nm = c.pixel_size_nm;
  return im;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPEND hyperspectral denoising toolkit"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")
      ->envname("SPEND_THREADS")
      ->check(CLI::PositiveNumber);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a phantom and its noisy measurement");
  std::string phantom_path, noise_path, out_clean, out_noisy, out_truth;
  synth_cmd->add_option("--phantom", phantom_path, "Phantom spec JSON")->required();
  synth_cmd->add_option("--noise", noise_path, "Noise spec JSON");
  synth_cmd->add_option("--out-clean", out_clean, "Clean cube path")->required();
  synth_cmd->add_option("--out-noisy", out_noisy, "Noisy cube path");
  synth_cmd->add_option("--out-truth", out_truth, "Directory for true maps and spectra");

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Noise statistics and permutation axis");
  std::string an_in, an_signal, an_out, an_png;
  analyze_cmd->add_option("--in", an_in, "Noisy cube")->required();
  analyze_cmd->add_option("--signal", an_signal, "Signal estimate cube (default: 5x5 median)");
  analyze_cmd->add_option("--out", an_out, "Report JSON")->required();
  analyze_cmd->add_option("--png-dir", an_png, "Directory for PSD plots");

  // permute
  auto* permute_cmd = app.add_subcommand("permute", "Build odd/even training pairs");
  std::string pm_in, pm_axis = "auto", pm_out_in, pm_out_tg, pm_meta;
  permute_cmd->add_option("--in", pm_in, "Noisy cube")->required();
  permute_cmd->add_option("--axis", pm_axis, "x, y, w or auto");
  permute_cmd->add_option("--out-input", pm_out_in, "Input stack path")->required();
  permute_cmd->add_option("--out-target", pm_out_tg, "Target stack path")->required();
  permute_cmd->add_option("--out-meta", pm_meta, "Pair metadata JSON (default <input>.pairs.json)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a denoiser on pair stacks");
  std::string tr_in, tr_tg, tr_cfg, tr_out, tr_meta, tr_axis;
  int tr_verbose = 1;
  train_cmd->add_option("--input", tr_in, "Input stack")->required();
  train_cmd->add_option("--target", tr_tg, "Target stack")->required();
  train_cmd->add_option("--config", tr_cfg, "Train config JSON")->required();
  train_cmd->add_option("--out", tr_out, "Checkpoint path")->required();
  train_cmd->add_option("--meta", tr_meta, "Pair metadata JSON (default <input>.pairs.json)");
  train_cmd->add_option("--axis", tr_axis, "Permutation axis when no metadata is present");
  train_cmd->add_option("--verbose", tr_verbose, "0 silent, 1 every 10 epochs, 2 every epoch");

  // denoise
  auto* denoise_cmd = app.add_subcommand("denoise", "Apply a trained denoiser to a cube");
  std::string dn_in, dn_model, dn_out;
  denoise_cmd->add_option("--in", dn_in, "Noisy cube")->required();
  denoise_cmd->add_option("--model", dn_model, "Checkpoint")->required();
  denoise_cmd->add_option("--out", dn_out, "Output cube")->required();

  // unmix
  auto* unmix_cmd = app.add_subcommand("unmix", "Chemical unmixing");
  std::string um_in, um_method = "lasso", um_refs, um_out_c, um_out_s, um_polygons, um_png;
  double um_lambda = 0.0;
  std::size_t um_iter = 500;
  int um_harmonic = 1;
  unmix_cmd->add_option("--in", um_in, "Cube")->required();
  unmix_cmd->add_option("--method", um_method, "lasso, mcr or phasor")
      ->check(CLI::IsMember({"lasso", "mcr", "phasor"}));
  unmix_cmd->add_option("--refs", um_refs, "Reference spectra CSV (K rows, wavenumber header)");
  unmix_cmd->add_option("--lambda", um_lambda, "L1 weight for lasso")->check(CLI::NonNegativeNumber);
  unmix_cmd->add_option("--max-iter", um_iter, "MCR iteration limit");
  unmix_cmd->add_option("--harmonic", um_harmonic, "Phasor harmonic");
  unmix_cmd->add_option("--polygons", um_polygons, "Phasor polygons JSON {name: [[g, s], ...]}");
  unmix_cmd->add_option("--out-c", um_out_c, "Concentration maps cube (lasso/mcr) or phasor CSV");
  unmix_cmd->add_option("--out-s", um_out_s, "Spectra CSV");
  unmix_cmd->add_option("--png", um_png, "Phasor scatter PNG");

  // baseline
  auto* baseline_cmd = app.add_subcommand("baseline", "arPLS baseline correction");
  std::string bl_in, bl_out, bl_base;
  baseline::ArplsConfig bl_cfg;
  baseline_cmd->add_option("--in", bl_in, "Spectra CSV")->required();
  baseline_cmd->add_option("--lambda", bl_cfg.lambda, "Smoothness weight");
  baseline_cmd->add_option("--ratio", bl_cfg.ratio, "Weight-change stopping ratio");
  baseline_cmd->add_option("--max-iter", bl_cfg.max_iter, "Iteration limit");
  baseline_cmd->add_option("--out", bl_out, "Corrected spectra CSV")->required();
  baseline_cmd->add_option("--out-baseline", bl_base, "Baseline CSV");

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "Compare two cubes");
  std::string mt_a, mt_b, mt_which = "ssim,psnr,frc,frechet", mt_roi, mt_out, mt_raw;
  int mt_frame = -1;
  metrics_cmd->add_option("--a", mt_a, "Reference cube")->required();
  metrics_cmd->add_option("--b", mt_b, "Test cube")->required();
  metrics_cmd->add_option("--which", mt_which, "Comma list of ssim,psnr,frc,frechet,snr,mse");
  metrics_cmd->add_option("--roi", mt_roi, "ROI JSON for snr");
  metrics_cmd->add_option("--raw", mt_raw, "Raw cube for snr gain (b is the denoised cube)");
  metrics_cmd->add_option("--frame", mt_frame, "Spectral frame for image metrics (default: band sum)");
  metrics_cmd->add_option("--out", mt_out, "Report JSON")->required();

  // pipeline
  auto* pipeline_cmd = app.add_subcommand("pipeline", "End-to-end synthetic experiment");
  std::string pl_cfg;
  pipeline_cmd->add_option("--config", pl_cfg, "Pipeline config JSON")->required();

  CLI11_PARSE(app, argc, argv);
  set_threads(threads);

  try {
    if (*synth_cmd) {
      const auto spec = synth::phantom_from_json(config::read_json(phantom_path));
      const auto ph = synth::make_phantom(spec);
      save_cube(ph.clean, out_clean);
      if (!noise_path.empty()) {
        if (out_noisy.empty()) throw Error("--noise needs --out-noisy");
        const auto noise = synth::noise_from_json(config::read_json(noise_path));
        save_cube(synth::corrupt(ph.clean, noise), out_noisy, noise.seed);
      }
      if (!out_truth.empty()) {
        fs::create_directories(out_truth);
        save_cube(maps_to_cube(ph.truth.C, spec.dims.nx, spec.dims.ny), fs::path(out_truth) / "maps");
        write_spectra_csv(fs::path(out_truth) / "spectra.csv",
                          spectra_of(ph.truth.S, spectral_axis(ph.clean)));
      }
    } else if (*analyze_cmd) {
      const HyperCube cube = load_cube(an_in);
      std::optional<HyperCube> sig;
      if (!an_signal.empty()) sig = load_cube(an_signal);
      const auto [axis, rep] = noisestats::select_permutation_axis(cube, sig ? &*sig : nullptr);
      config::write_json(an_out, noisestats::report_to_json(rep));
      if (!an_png.empty()) {
        for (Axis a : kAllAxes) {
          std::vector<std::pair<double, double>> pts;
          double hi = 0;
          for (const auto& p : rep.psd[static_cast<int>(a)]) {
            pts.emplace_back(p.frequency, p.power);
            hi = std::max(hi, p.power);
          }
          png::write_curve(fs::path(an_png) / ("psd_" + std::string(axis_name(a)) + ".png"), pts,
                           0.5, 0.0, hi > 0 ? hi : 1.0);
        }
      }
      std::printf("selected axis: %s\n", std::string(axis_name(axis)).c_str());
    } else if (*permute_cmd) {
      const HyperCube cube = load_cube(pm_in);
      const Axis axis = pm_axis == "auto" ? noisestats::select_permutation_axis(cube).first
                                          : parse_axis(pm_axis);
      const auto pairs = permute::split_permute(cube, axis);
      const auto seed = load_cube_seed(pm_in);
      save_cube(pairs.input, pm_out_in, seed);
      save_cube(pairs.target, pm_out_tg, seed);
      const fs::path meta = pm_meta.empty() ? fs::path(cube_stem(pm_out_in)).concat(".pairs.json")
                                            : fs::path(pm_meta);
      config::write_json(meta, permute::meta_to_json(pairs));
      std::printf("axis %s, %zu pairs\n", std::string(axis_name(axis)).c_str(),
                  pairs.input.extent(axis));
    } else if (*train_cmd) {
      permute::PairSet pairs;
      pairs.input = load_cube(tr_in);
      pairs.target = load_cube(tr_tg);
      const fs::path meta = tr_meta.empty() ? fs::path(cube_stem(tr_in)).concat(".pairs.json")
                                            : fs::path(tr_meta);
      if (fs::exists(meta)) {
        permute::apply_meta(config::read_json(meta), pairs);
      } else if (!tr_axis.empty()) {
        pairs.axis = parse_axis(tr_axis);
      } else {
        throw Error("no pair metadata at " + meta.string() + "; pass --axis");
      }
      if (!tr_axis.empty()) pairs.axis = parse_axis(tr_axis);
      const json tj = config::read_json(tr_cfg);
      const auto tc = nnet::train_config_from_json(tj);
      const auto mc = nnet::model_config_from_json(tj.value("model", json::object()));
      auto model = nnet::train(nnet::build_model(mc), pairs, tc, [&](const nnet::EpochRecord& r) {
        if (tr_verbose > 1 || (tr_verbose > 0 && (r.epoch % 10 == 0 || r.epoch == 1))) {
          std::fprintf(stderr, "epoch %d train %.6g val %.6g\n", r.epoch, r.train_loss, r.val_loss);
        }
      });
      nnet::save_checkpoint(model, tr_out);
      if (model.diverged) {
        std::fprintf(stderr, "training diverged; saved the last good checkpoint\n");
        return 1;
      }
    } else if (*denoise_cmd) {
      const auto model = nnet::load_checkpoint(dn_model);
      const HyperCube cube = load_cube(dn_in);
      save_cube(nnet::predict(model, cube), dn_out, load_cube_seed(dn_in));
    } else if (*unmix_cmd) {
      const HyperCube cube = load_cube(um_in);
      if (um_method == "phasor") {
        const auto map = spectral_phasor(cube, um_harmonic);
        if (!um_out_c.empty()) {
          std::vector<std::vector<double>> rows;
          for (std::size_t p = 0; p < map.g.size(); ++p) {
            rows.push_back({static_cast<double>(p / map.ny), static_cast<double>(p % map.ny),
                            map.g[p], map.s[p], static_cast<double>(map.dark[p])});
          }
          ensure_parent(um_out_c);
          write_csv(um_out_c, {"x", "y", "g", "s", "dark"}, rows);
        }
        if (!um_png.empty()) {
          std::vector<std::pair<double, double>> pts;
          for (std::size_t p = 0; p < map.g.size(); ++p) {
            if (!map.dark[p]) pts.emplace_back(map.g[p], map.s[p]);
          }
          png::write_scatter(um_png, pts, -1.0, 1.0);
        }
        if (!um_polygons.empty()) {
          const json pj = config::read_json(um_polygons);
          SpectraTable t{spectral_axis(cube), {}};
          json masks = json::object();
          for (const auto& [name, verts] : pj.items()) {
            std::vector<PhasorPoint> poly;
            for (const auto& v : verts) poly.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
            const auto sel = phasor_select(map, poly, cube, name);
            t.rows.push_back(sel.spectrum);
            masks[name] = sel.pixels;
          }
          if (!um_out_s.empty()) {
            ensure_parent(um_out_s);
            write_spectra_csv(um_out_s, t);
            config::write_json(fs::path(um_out_s).replace_extension(".masks.json"), masks);
          }
        }
      } else {
        if (um_refs.empty()) throw Error("--refs is required for " + um_method);
        const Matrix S = matrix_of(read_spectra_csv(um_refs));
        const auto D = reshape_cube(cube);
        UnmixResult r;
        if (um_method == "lasso") {
          r = lasso_unmix(D, S, um_lambda);
        } else {
          McrOptions o;
          o.max_iter = um_iter;
          r = mcr_als(D, S, o);
        }
        if (!um_out_c.empty()) save_cube(maps_to_cube(r.C, cube.nx(), cube.ny()), um_out_c);
        if (!um_out_s.empty()) {
          ensure_parent(um_out_s);
          write_spectra_csv(um_out_s, spectra_of(r.S, spectral_axis(cube)));
        }
        std::printf("iterations %zu, converged %s, residual %.6g\n", r.iterations,
                    r.converged ? "yes" : "no", r.objective.empty() ? 0.0 : r.objective.back());
      }
    } else if (*baseline_cmd) {
      const SpectraTable in = read_spectra_csv(bl_in);
      SpectraTable corrected{in.wavenumbers, {}}, base{in.wavenumbers, {}};
      corrected.rows.resize(in.rows.size());
      base.rows.resize(in.rows.size());
      std::vector<std::string> errors(in.rows.size());
      parallel_for(in.rows.size(), [&](std::size_t i) {
        try {
          const auto r = baseline::arpls(in.rows[i], bl_cfg);
          base.rows[i] = r.z;
          corrected.rows[i].resize(r.z.size());
          for (std::size_t k = 0; k < r.z.size(); ++k) corrected.rows[i][k] = in.rows[i][k] - r.z[k];
        } catch (const std::exception& e) {
          errors[i] = "spectrum " + std::to_string(i) + ": " + e.what();
        }
      });
      for (const auto& e : errors) {
        if (!e.empty()) throw Error(e);
      }
      ensure_parent(bl_out);
      write_spectra_csv(bl_out, corrected);
      if (!bl_base.empty()) {
        ensure_parent(bl_base);
        write_spectra_csv(bl_base, base);
      }
    } else if (*metrics_cmd) {
      const HyperCube a = load_cube(mt_a), b = load_cube(mt_b);
      json rep;
      rep["version"] = 1;
      const Image ia = frame_or_sum(a, mt_frame), ib = frame_or_sum(b, mt_frame);
      for (const auto& which : split_list(mt_which)) {
        if (which == "ssim") {
          rep["ssim"] = metrics::ssim(ia, ib);
        } else if (which == "psnr") {
          const double p = metrics::psnr(ia, ib);
          rep["psnr"] = std::isinf(p) ? json("inf") : json(p);
        } else if (which == "mse") {
          rep["mse"] = metrics::mse(a, b);
        } else if (which == "frc") {
          const auto f = metrics::frc_resolution(ia, ib);
          rep["frc"] = {{"cutoff_frequency", f.cutoff_frequency},
                        {"cutoff_found", f.cutoff_found},
                        {"resolution_px", f.resolution_px},
                        {"frequency", f.frequency},
                        {"correlation", f.correlation}};
          if (f.resolution_nm) rep["frc"]["resolution_nm"] = *f.resolution_nm;
        } else if (which == "frechet") {
          const auto m = metrics::spectral_distortion_map(b, a);
          rep["frechet_mean"] = m.mean;
        } else if (which == "snr") {
          if (mt_roi.empty()) throw Error("snr needs --roi");
          const auto [sig, bg] = read_rois(mt_roi, a.ny());
          rep["snr_b"] = metrics::snr(b, sig, bg);
          if (!mt_raw.empty()) {
            const HyperCube raw = load_cube(mt_raw);
            rep["snr_gain"] = metrics::snr_gain(raw, b, sig, bg);
          }
        } else {
          throw Error("unknown metric '" + which + "'");
        }
      }
      config::write_json(mt_out, rep);
    } else if (*pipeline_cmd) {
      const auto cfg = pipeline::load_pipeline_config(pl_cfg);
      const auto result = pipeline::run_pipeline(cfg);
      const auto& m = result.report.at("metrics");
      std::printf("snr_gain %.4f  mse_ratio %.4f  frechet_ratio %.4f  -> %s\n",
                  m.at("snr_gain").get<double>(), m.at("mse_ratio").get<double>(),
                  m.at("frechet_ratio").get<double>(), result.passed ? "PASS" : "FAIL");
      return result.passed ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "spend: error: %s\n", e.what());
    return 2;
  }
  return 0;
}
