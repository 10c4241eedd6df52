#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "tbf/bilateral.hpp"
#include "tbf/data_io.hpp"
#include "tbf/errors.hpp"
#include "tbf/metrics.hpp"
#include "tbf/parallel.hpp"
#include "tbf/pipeline.hpp"
#include "tbf/rng.hpp"
#include "tbf/training.hpp"

namespace tbf::cli {
namespace {

struct GradcheckOpts {
  int size = 8;
  std::uint64_t seed = 0;
  double eps = 1e-6;
  double tol = 1e-4;
  bool constant = false;
  int depth = 1;
  std::vector<double> sigma;
};

struct SynthOpts {
  std::vector<int> dims{64, 64, 4};
  int primitives = 8;
  std::uint64_t seed = 0;
  std::string noise = "gaussian";
  double sigma = 0.1;
  double photons = 1e4;
  std::string out_clean;
  std::string out_noisy;
};

struct TrainOpts {
  std::string noisy;
  std::string clean;
  std::string mode = "supervised";
  int depth = 3;
  TrainConfig cfg;
  std::string out_params;
  std::string out_history;
};

struct DenoiseOpts {
  std::string input;
  std::string params;
  std::string output;
};

struct EvaluateOpts {
  std::vector<std::string> pred;
  std::vector<std::string> target;
  double data_range = 1.0;
  std::string report;
};

struct DepthStudyOpts {
  std::string noisy;
  std::string clean;
  std::string eval_noisy;
  std::string eval_clean;
  std::string mode = "supervised";
  std::vector<int> depths{1, 2, 3, 4, 5, 6};
  TrainConfig cfg;
  double data_range = 1.0;
  std::string out;
};

void add_training_flags(CLI::App* sub, std::string& mode, TrainConfig& cfg) {
  sub->add_option("--mode", mode, "supervised | noise2void")
      ->check(CLI::IsMember({"supervised", "noise2void", "n2v"}))
      ->capture_default_str();
  sub->add_option("--iters", cfg.max_iters, "Maximum optimisation iterations")
      ->check(CLI::Range(1, std::numeric_limits<int>::max()))
      ->capture_default_str();
  sub->add_option("--lr-spatial", cfg.lr_spatial, "Adam learning rate for sigma_x/y/z")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--lr-range", cfg.lr_range, "Adam learning rate for sigma_r")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--init-spatial", cfg.init_sigma_spatial, "Initial sigma_x/y/z")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--init-range", cfg.init_sigma_range, "Initial sigma_r")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--mask-ratio", cfg.n2v_mask_ratio, "Noise2Void fraction of replaced voxels")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
}

std::string format_params(const SigmaParams& p) {
  std::ostringstream os;
  os << std::setprecision(6) << "sigma_x=" << p.sigma_x << " sigma_y=" << p.sigma_y << " sigma_z=" << p.sigma_z
     << " sigma_r=" << p.sigma_r;
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << text;
}

int cmd_gradcheck(const GradcheckOpts& o, std::ostream& out) {
  if (o.size < 1 || o.size > 16) throw InvalidInputError("--size must lie in [1, 16]");
  if (!(o.eps > 0.0) || !(o.tol > 0.0)) throw InvalidInputError("--eps and --tol must be > 0");
  if (!o.sigma.empty() && o.sigma.size() != 4) throw InvalidInputError("--sigma takes four values x,y,z,r");

  Rng rng(o.seed);
  const Dims dims{o.size, o.size, o.size};
  Volume x = Volume::filled(dims, 0.5);
  if (!o.constant) {
    for (double& v : x.values()) v = uniform_real(rng, 0.0, 1.0);
  }
  std::vector<SigmaParams> layers;
  for (int j = 0; j < o.depth; ++j) {
    if (!o.sigma.empty()) {
      layers.push_back({o.sigma[0], o.sigma[1], o.sigma[2], o.sigma[3]});
    } else {
      layers.push_back({uniform_real(rng, 0.1, 1.0), uniform_real(rng, 0.1, 1.0), uniform_real(rng, 0.1, 1.0),
                        std::pow(10.0, uniform_real(rng, -3.0, 1.0))});
    }
  }
  const FilterPipeline fp(layers);
  for (int j = 0; j < fp.depth(); ++j) out << "layer " << j << ": " << format_params(fp.layer(j)) << "\n";

  double err_sigma = 0.0, err_input = 0.0;
  bool pass = false;
  if (fp.depth() == 1) {
    const auto r = gradcheck(x, fp.layer(0), o.eps, o.tol, o.seed);
    err_sigma = r.max_rel_err_sigma;
    err_input = r.max_rel_err_input;
    pass = r.pass;
  } else {
    const auto r = pipeline_gradcheck(x, fp, o.eps, o.tol, o.seed);
    err_sigma = r.max_rel_err_sigma;
    err_input = r.max_rel_err_input;
    pass = r.pass;
  }
  out << std::scientific << std::setprecision(3) << "max_rel_err_sigma=" << err_sigma
      << " max_rel_err_input=" << err_input << " tol=" << o.tol << "\n"
      << std::defaultfloat << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

int cmd_synth(const SynthOpts& o, std::ostream& out) {
  if (o.dims.size() != 3) throw InvalidInputError("--dims takes three values nx,ny,nz");
  const Dims dims{o.dims[0], o.dims[1], o.dims[2]};
  const Volume clean = generate_phantom(random_phantom_spec(dims, o.primitives, o.seed));
  NoiseModel model = GaussianNoise{o.sigma};
  if (o.noise == "poisson") model = PoissonNoise{o.photons};
  const Volume noisy = add_noise(clean, model, o.seed);
  save_volume(o.out_clean, clean);
  save_volume(o.out_noisy, noisy);
  out << "wrote " << volume_file_paths(o.out_clean).header.string() << " and "
      << volume_file_paths(o.out_noisy).header.string() << "\n"
      << std::fixed << std::setprecision(2) << "noisy PSNR " << psnr(noisy, clean) << " dB\n";
  return kExitOk;
}

int cmd_train(TrainOpts o, std::ostream& out) {
  o.cfg.mode = parse_train_mode(o.mode);
  if (o.cfg.mode == TrainMode::supervised && o.clean.empty()) {
    throw InvalidInputError("--clean is required for supervised training");
  }
  const Volume noisy = load_volume(o.noisy);
  std::optional<Volume> clean;
  if (!o.clean.empty()) clean = load_volume(o.clean);

  const TrainResult r = train(noisy, clean ? &*clean : nullptr, o.depth, o.cfg);
  save_params(o.out_params, r.pipeline);
  if (!o.out_history.empty()) {
    std::ostringstream csv;
    write_history_csv(csv, r.history);
    write_text(o.out_history, csv.str());
  }
  out << "iterations " << r.history.size() << ", best loss " << std::setprecision(10) << r.best_loss
      << " at iteration " << r.best_iteration << ", final loss " << r.history.back().loss << "\n";
  for (int j = 0; j < r.pipeline.depth(); ++j) out << "layer " << j << ": " << format_params(r.pipeline.layer(j)) << "\n";
  return kExitOk;
}

int cmd_denoise(const DenoiseOpts& o, std::ostream& out) {
  const Volume input = load_volume(o.input);
  const FilterPipeline fp = load_params(o.params);
  const auto t0 = std::chrono::steady_clock::now();
  const Volume output = pipeline_apply(input, fp);
  const auto t1 = std::chrono::steady_clock::now();
  save_volume(o.output, output);
  out << "filtered " << input.size() << " voxels with " << fp.depth() << " layer(s) in " << std::fixed
      << std::setprecision(4) << std::chrono::duration<double>(t1 - t0).count() << " s\n";
  return kExitOk;
}

int cmd_evaluate(const EvaluateOpts& o, std::ostream& out) {
  if (o.pred.size() != o.target.size()) throw InvalidInputError("--pred and --target must be given equally often");
  MetricConfig mc;
  mc.data_range = o.data_range;
  std::vector<EvaluationRow> rows;
  for (std::size_t j = 0; j < o.pred.size(); ++j) {
    const Volume pred = load_volume(o.pred[j]);
    const Volume target = load_volume(o.target[j]);
    rows.push_back({volume_file_paths(o.pred[j]).header.stem().string(), ssim(pred, target, mc), psnr(pred, target, mc)});
  }
  std::ostringstream csv;
  write_evaluation_csv(csv, rows);
  out << csv.str();
  if (!o.report.empty()) write_text(o.report, csv.str());
  return kExitOk;
}

int cmd_depth_study(DepthStudyOpts o, std::ostream& out) {
  o.cfg.mode = parse_train_mode(o.mode);
  if (o.cfg.mode == TrainMode::supervised && o.clean.empty()) {
    throw InvalidInputError("--clean is required for supervised training");
  }
  if (o.eval_noisy.empty() != o.eval_clean.empty()) {
    throw InvalidInputError("--eval-noisy and --eval-clean must be given together");
  }
  for (int d : o.depths) {
    if (d < 1) throw InvalidInputError("--depths entries must be >= 1");
  }
  MetricConfig mc;
  mc.data_range = o.data_range;

  const Volume noisy = load_volume(o.noisy);
  std::optional<Volume> clean;
  if (!o.clean.empty()) clean = load_volume(o.clean);
  const Volume eval_noisy = o.eval_noisy.empty() ? noisy : load_volume(o.eval_noisy);
  std::optional<Volume> eval_clean = clean;
  if (!o.eval_clean.empty()) eval_clean = load_volume(o.eval_clean);
  if (!eval_clean) throw InvalidInputError("evaluation needs a clean reference (--clean or --eval-clean)");

  std::ostringstream csv;
  csv << "depth,params,ssim,psnr,best_loss\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  // Depth 0 is the unfiltered input.
  csv << 0 << "," << 0 << "," << ssim(eval_noisy, *eval_clean, mc) << "," << psnr(eval_noisy, *eval_clean, mc)
      << ",\n";
  for (int d : o.depths) {
    const TrainResult r = train(noisy, clean ? &*clean : nullptr, d, o.cfg);
    const Volume pred = pipeline_apply(eval_noisy, r.pipeline);
    csv << d << "," << r.pipeline.param_count() << "," << ssim(pred, *eval_clean, mc) << ","
        << psnr(pred, *eval_clean, mc) << "," << r.best_loss << "\n";
  }
  out << csv.str();
  if (!o.out.empty()) write_text(o.out, csv.str());
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trainable bilateral filter denoising toolkit", args.empty() ? "tbf" : args.front()};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, std::string("Worker threads (default: ") + kWorkersEnv + " or all cores)")
      ->check(CLI::NonNegativeNumber);

  GradcheckOpts gc;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gradcheck_cmd->add_option("--size", gc.size, "Edge length of the random test volume (<= 16)")->capture_default_str();
  gradcheck_cmd->add_option("--seed", gc.seed, "Seed for data, widths and probe")->capture_default_str();
  gradcheck_cmd->add_option("--eps", gc.eps, "Finite-difference step")->capture_default_str();
  gradcheck_cmd->add_option("--tol", gc.tol, "Maximum relative error")->capture_default_str();
  gradcheck_cmd->add_flag("--constant", gc.constant, "Use a constant input volume");
  gradcheck_cmd->add_option("--depth", gc.depth, "Number of stacked layers")
      ->check(CLI::Range(1, 8))
      ->capture_default_str();
  gradcheck_cmd->add_option("--sigma", gc.sigma, "Fixed widths x,y,z,r (default: random)")->delimiter(',');

  SynthOpts sy;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a phantom and a noisy copy");
  synth_cmd->add_option("--dims", sy.dims, "nx,ny,nz")->delimiter(',')->expected(3)->capture_default_str();
  synth_cmd->add_option("--primitives", sy.primitives, "Number of random structures")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth_cmd->add_option("--seed", sy.seed, "Seed for phantom and noise")->capture_default_str();
  synth_cmd->add_option("--noise", sy.noise, "gaussian | poisson")
      ->check(CLI::IsMember({"gaussian", "poisson"}))
      ->capture_default_str();
  synth_cmd->add_option("--sigma", sy.sigma, "Gaussian noise standard deviation")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth_cmd->add_option("--photons", sy.photons, "Poisson photons at unit intensity")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--out-clean", sy.out_clean, "Clean volume path")->required();
  synth_cmd->add_option("--out-noisy", sy.out_noisy, "Noisy volume path")->required();

  TrainOpts tr;
  auto* train_cmd = app.add_subcommand("train", "Train a filter pipeline");
  train_cmd->add_option("--noisy", tr.noisy, "Noisy input volume")->required();
  train_cmd->add_option("--clean", tr.clean, "Clean target volume (supervised mode)");
  train_cmd->add_option("--depth", tr.depth, "Number of filter layers")
      ->check(CLI::Range(1, 64))
      ->capture_default_str();
  add_training_flags(train_cmd, tr.mode, tr.cfg);
  train_cmd->add_option("--out-params", tr.out_params, "Output parameter file")->required();
  train_cmd->add_option("--out-history", tr.out_history, "Output loss history CSV");

  DenoiseOpts dn;
  auto* denoise_cmd = app.add_subcommand("denoise", "Apply a trained pipeline");
  denoise_cmd->add_option("--input", dn.input, "Input volume")->required();
  denoise_cmd->add_option("--params", dn.params, "Parameter file")->required();
  denoise_cmd->add_option("--output", dn.output, "Output volume")->required();

  EvaluateOpts ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "SSIM and PSNR of predictions against targets");
  evaluate_cmd->add_option("--pred", ev.pred, "Prediction volume (repeatable)")->required();
  evaluate_cmd->add_option("--target", ev.target, "Target volume (repeatable)")->required();
  evaluate_cmd->add_option("--data-range", ev.data_range, "Intensity range for SSIM/PSNR")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  evaluate_cmd->add_option("--report", ev.report, "Also write the CSV report here");

  DepthStudyOpts ds;
  auto* depth_cmd = app.add_subcommand("depth-study", "Train pipelines of several depths and compare them");
  depth_cmd->add_option("--noisy", ds.noisy, "Noisy training volume")->required();
  depth_cmd->add_option("--clean", ds.clean, "Clean training target");
  depth_cmd->add_option("--eval-noisy", ds.eval_noisy, "Held-out noisy volume (default: training volume)");
  depth_cmd->add_option("--eval-clean", ds.eval_clean, "Held-out clean volume (default: training target)");
  depth_cmd->add_option("--depths", ds.depths, "Comma-separated depths")->delimiter(',')->capture_default_str();
  add_training_flags(depth_cmd, ds.mode, ds.cfg);
  depth_cmd->add_option("--data-range", ds.data_range, "Intensity range for SSIM/PSNR")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  depth_cmd->add_option("--out", ds.out, "Also write the CSV here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  if (threads > 0) set_num_workers(threads);

  try {
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(gc, out);
    if (synth_cmd->parsed()) return cmd_synth(sy, out);
    if (train_cmd->parsed()) return cmd_train(tr, out);
    if (denoise_cmd->parsed()) return cmd_denoise(dn, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(ev, out);
    if (depth_cmd->parsed()) return cmd_depth_study(ds, out);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace tbf::cli
