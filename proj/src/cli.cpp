#include "hsiu/cli.hpp"

#include "hsiu/eval.hpp"
#include "hsiu/fcls.hpp"
#include "hsiu/io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace hsiu {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string neighborhood_name(NeighborhoodOrder o) {
  return o == NeighborhoodOrder::FourPixel ? "4" : "8";
}

NeighborhoodOrder parse_neighborhood(int n) {
  if (n == 4) return NeighborhoodOrder::FourPixel;
  if (n == 8) return NeighborhoodOrder::EightPixel;
  throw InvalidInput("neighborhood must be 4 or 8");
}

NoiseSpec parse_noise(const std::string& s) {
  NoiseSpec out;
  if (s == "colored") return out;
  if (s.rfind("iid:", 0) == 0) {
    out.colored = false;
    try {
      std::size_t used = 0;
      out.variance = std::stod(s.substr(4), &used);
      if (used != s.size() - 4) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw InvalidInput("malformed noise variance in '" + s + "'");
    }
    if (!(out.variance > 0.0)) throw InvalidInput("noise variance must be positive");
    return out;
  }
  throw InvalidInput("noise must be 'colored' or 'iid:<variance>', got '" + s + "'");
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

nlohmann::json vector_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) out.push_back(v(i));
    else out.push_back(nullptr);
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void add_config(CLI::App* app) {
  app->add_option("--config", "key=value file; command-line flags take precedence")
      ->check(CLI::ExistingFile);
}

// CLI11 only reads config files attached to the root app, so subcommand
// files are applied here: every key must name an option of the subcommand,
// and options already given on the command line keep their values.
void apply_config(CLI::App* app) {
  const CLI::Option* file = app->get_option("--config");
  if (file->count() == 0) return;
  const auto path = file->as<std::string>();
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigBase().from_file(path);
  } catch (const CLI::FileError& e) {
    throw IoError(e.what());
  }
  for (const auto& item : items) {
    if (!item.parents.empty() || item.name == "config") {
      throw InvalidInput(path + ": unsupported key '" + item.fullname() + "'");
    }
    CLI::Option* opt = app->get_option_no_throw("--" + item.name);
    if (opt == nullptr) throw InvalidInput(path + ": unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

// generate ------------------------------------------------------------------

struct GenerateArgs {
  ScenarioSpec spec;
  std::string scenario = "rca-levels";
  std::string noise = "colored";
  int neighborhood = 8;
  std::string out;
};

void setup_generate(CLI::App& root, GenerateArgs& a) {
  auto* cmd = root.add_subcommand("generate", "Write a synthetic dataset directory");
  add_config(cmd);
  cmd->add_option("--scenario", a.scenario, "rca-levels or mixed-models")
      ->check(CLI::IsMember({"rca-levels", "mixed-models"}))
      ->capture_default_str();
  cmd->add_option("--width", a.spec.width)->capture_default_str();
  cmd->add_option("--height", a.spec.height)->capture_default_str();
  cmd->add_option("--bands", a.spec.bands)->capture_default_str();
  cmd->add_option("--r", a.spec.endmembers, "Endmember count")->capture_default_str();
  cmd->add_option("--classes", a.spec.classes)->capture_default_str();
  cmd->add_option("--beta", a.spec.beta)->capture_default_str();
  cmd->add_option("--seed", a.spec.seed)->capture_default_str();
  cmd->add_option("--potts-sweeps", a.spec.potts_sweeps)->capture_default_str();
  cmd->add_option("--neighborhood", a.neighborhood, "4 or 8")->capture_default_str();
  cmd->add_option("--s2", a.spec.rca_scales, "rca-levels: one scale per nonlinear class")
      ->capture_default_str();
  cmd->add_option("--b", a.spec.ppnmm_b, "mixed-models: PPNMM coefficient")->capture_default_str();
  cmd->add_option("--gbm-gamma-min", a.spec.gbm_gamma_min)->capture_default_str();
  cmd->add_option("--gbm-gamma-max", a.spec.gbm_gamma_max)->capture_default_str();
  cmd->add_option("--rca-s2", a.spec.rca_scale, "mixed-models: scale of the RCA class")
      ->capture_default_str();
  cmd->add_option("--noise", a.noise, "colored or iid:<variance>")->capture_default_str();
  cmd->add_option("--endmembers", a.spec.endmember_file, "L x R CSV (default: synthetic)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "Output directory")->required();
}

int run_generate(GenerateArgs& a) {
  a.spec.scenario = parse_scenario(a.scenario);
  a.spec.noise = parse_noise(a.noise);
  a.spec.neighborhood = parse_neighborhood(a.neighborhood);
  const SyntheticDataset d = generate(a.spec);

  const fs::path out(a.out);
  ensure_dir(out);
  write_cube(out / "image.hsc", d.image);
  write_csv_matrix(out / "endmembers.csv", d.endmembers.values());
  write_csv_matrix(out / "truth_abundances.csv", d.abundances.values());
  write_labels_csv(out / "truth_labels.csv", d.labels);
  write_csv_matrix(out / "truth_phi.csv", d.nonlinearity);
  write_csv_vector(out / "truth_sigma2.csv", d.noise_variances);
  write_csv_vector(out / "truth_s2.csv", d.scales);
  write_json(out / "spec.json", to_json(d.spec));

  std::cout << "generated " << to_string(d.spec.scenario) << ": N=" << d.image.pixels()
            << " K=" << d.spec.classes << " seed=" << d.spec.seed << " -> " << out.string()
            << "\n";
  return kExitOk;
}

// unmix ---------------------------------------------------------------------

struct UnmixArgs {
  SamplerConfig config;
  std::string image;
  std::string endmembers;
  std::string algo = "rca";
  int neighborhood = 8;
  int threads = -1;
  std::string out;
};

void setup_unmix(CLI::App& root, UnmixArgs& a) {
  auto* cmd = root.add_subcommand("unmix", "Unmix an image with RCA-SU or FCLS");
  add_config(cmd);
  cmd->add_option("--image", a.image, "Cube file (.hsc)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--endmembers", a.endmembers, "L x R CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--algo", a.algo, "rca or fcls")
      ->check(CLI::IsMember({"rca", "fcls"}))
      ->capture_default_str();
  cmd->add_option("--classes", a.config.classes)->capture_default_str();
  cmd->add_option("--beta", a.config.beta)->capture_default_str();
  cmd->add_option("--iters", a.config.iterations, "Total iterations")->capture_default_str();
  cmd->add_option("--burnin", a.config.burn_in, "Burn-in iterations")->capture_default_str();
  cmd->add_option("--seed", a.config.seed)->capture_default_str();
  cmd->add_option("--gamma", a.config.gamma)->capture_default_str();
  cmd->add_option("--nu", a.config.nu)->capture_default_str();
  cmd->add_option("--thin", a.config.thinning)->capture_default_str();
  cmd->add_option("--adapt-interval", a.config.adapt_interval)->capture_default_str();
  cmd->add_option("--adapt-factor", a.config.adapt_factor)->capture_default_str();
  cmd->add_option("--inner-sweeps", a.config.inner_sweeps)->capture_default_str();
  cmd->add_option("--noise-step", a.config.initial_noise_step)->capture_default_str();
  cmd->add_option("--scale-step", a.config.initial_scale_step)->capture_default_str();
  cmd->add_option("--neighborhood", a.neighborhood, "4 or 8")->capture_default_str();
  cmd->add_option("--threads", a.threads, "Worker threads (overrides HSIU_THREADS)");
  cmd->add_flag("--approx-parallel-noise", a.config.approximate_parallel_noise,
                "Update all noise bands against the same state (inexact)");
  cmd->add_option("--out", a.out, "Output directory")->required();
}

nlohmann::json base_meta(const UnmixArgs& a, const HyperspectralImage& image) {
  nlohmann::json meta;
  meta["config"] = to_json(a.config);
  meta["seed"] = a.config.seed;
  meta["image"] = a.image;
  meta["endmembers"] = a.endmembers;
  meta["width"] = image.width();
  meta["height"] = image.height();
  meta["bands"] = image.bands();
  return meta;
}

int run_unmix(UnmixArgs& a) {
  a.config.neighborhood = parse_neighborhood(a.neighborhood);
  a.config.threads = a.threads >= 0 ? a.threads : threads_from_env();
  const HyperspectralImage image = read_cube(a.image);
  const EndmemberMatrix m = read_endmembers_csv(a.endmembers);
  if (m.bands() != image.bands()) {
    throw DimensionMismatch("image has " + std::to_string(image.bands()) + " bands but " +
                            a.endmembers + " has " + std::to_string(m.bands()) + " rows");
  }
  const fs::path out(a.out);

  if (a.algo == "fcls") {
    FclsOptions opts;
    opts.threads = a.config.threads;
    const FclsResult r = fcls(image.data(), m, opts);
    ensure_dir(out);
    write_csv_matrix(out / "abundances.csv", r.abundances.values());
    if (r.failed_pixels > 0) {
      std::cerr << "warning: FCLS did not converge on " << r.failed_pixels
                << " pixels (set to the barycenter)\n";
    }
    std::cout << "fcls: N=" << image.pixels() << " -> " << out.string() << "\n";
    return kExitOk;
  }

  a.config.validate();
  ensure_dir(out);
  nlohmann::json meta = base_meta(a, image);
  Chain chain;
  try {
    chain = run_rca_su(image, m, a.config);
  } catch (const ChainDivergence& e) {
    meta["error"] = e.what();
    meta["diverged_at_iteration"] = e.iteration();
    write_json(out / "chain_meta.json", meta);
    throw;
  }
  const Estimates raw = estimate(chain);
  const Estimates est = align_nonlinear_classes(raw);
  const auto perm = scale_ordering(raw.scales);

  write_labels_csv(out / "labels_map.csv", est.labels);
  write_pgm(out / "labels_map.pgm", render_labels(est.labels));
  write_csv_matrix(out / "abundances.csv", est.abundances.values());
  write_csv_vector(out / "sigma2.csv", est.noise_variances);
  write_csv_vector(out / "s2.csv", est.scales);
  write_csv_matrix(out / "label_posterior.csv", est.label_posterior);

  meta["stored_samples"] = chain.size();
  meta["runtime_seconds"] = chain.runtime_seconds;
  // Acceptance rates and steps are reported in the aligned class order.
  Vector scale_acc(chain.scale_acceptance.size());
  Vector scale_steps(chain.scale_steps.size());
  for (Index k = 0; k < scale_acc.size(); ++k) {
    const Index j = perm[static_cast<std::size_t>(k + 1)] - 1;
    scale_acc(j) = chain.scale_acceptance(k);
    scale_steps(j) = chain.scale_steps(k);
  }
  meta["acceptance"] = {{"sigma2", vector_json(chain.noise_acceptance)},
                        {"s2", vector_json(scale_acc)}};
  meta["proposal_steps"] = {{"sigma2", vector_json(chain.noise_steps)},
                            {"s2", vector_json(scale_steps)}};
  meta["final_log_posterior"] = chain.log_posterior.back();
  write_json(out / "chain_meta.json", meta);

  std::cout << "rca-su: N=" << image.pixels() << " K=" << a.config.classes
            << " samples=" << chain.size() << " runtime=" << chain.runtime_seconds << "s -> "
            << out.string() << "\n";
  return kExitOk;
}

// eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string truth;
  std::string results;
  std::string out;
};

void setup_eval(CLI::App& root, EvalArgs& a) {
  auto* cmd = root.add_subcommand("eval", "Score a results directory against ground truth");
  add_config(cmd);
  cmd->add_option("--truth", a.truth, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--results", a.results, "Results directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--out", a.out, "Report directory (default: the results directory)");
}

void require_shape(const Matrix& m, Index rows, Index cols, const fs::path& path) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionMismatch(path.string() + " is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                            std::to_string(cols));
  }
}

MethodReport score(const std::string& name, const AbundanceMatrix& a_hat, const Matrix& y_hat,
                   const Matrix& a_true, const Matrix& y, const LabelField& z_true) {
  MethodReport r;
  r.name = name;
  r.rnmse = rnmse_per_class(a_hat.values(), a_true, z_true);
  r.re = re_per_class(y_hat, y, z_true);
  return r;
}

int run_eval(const EvalArgs& a) {
  const fs::path truth(a.truth);
  const fs::path results(a.results);
  const fs::path out = a.out.empty() ? results : fs::path(a.out);

  const nlohmann::json spec = read_json(truth / "spec.json");
  if (!spec.contains("classes")) throw InvalidInput((truth / "spec.json").string() + ": no 'classes'");
  const int classes = spec["classes"].get<int>();
  const HyperspectralImage image = read_cube(truth / "image.hsc");
  const EndmemberMatrix m = read_endmembers_csv(truth / "endmembers.csv");
  const Matrix a_true = read_csv_matrix(truth / "truth_abundances.csv");
  const LabelField z_true = read_labels_csv(truth / "truth_labels.csv", classes);
  const Vector sigma2_true = read_csv_vector(truth / "truth_sigma2.csv");
  const Vector s2_true = read_csv_vector(truth / "truth_s2.csv");
  const Index n = image.pixels();
  const Index r_count = m.count();
  require_shape(a_true, r_count, n, truth / "truth_abundances.csv");
  if (m.bands() != image.bands()) throw DimensionMismatch("endmembers and image disagree on bands");
  if (z_true.width() != image.width() || z_true.height() != image.height()) {
    throw DimensionMismatch("truth_labels.csv does not match the image size");
  }

  EvalReport report;
  report.width = image.width();
  report.height = image.height();
  report.bands = image.bands();
  report.endmembers = r_count;
  report.classes = classes;
  report.class_counts = z_true.histogram();
  report.metadata = {{"truth", truth.string()}, {"results", results.string()}};
  if (spec.contains("seed")) report.metadata["dataset_seed"] = spec["seed"];

  const fs::path ab_path = results / "abundances.csv";
  const Matrix a_est_raw = read_csv_matrix(ab_path);
  require_shape(a_est_raw, r_count, n, ab_path);
  const AbundanceMatrix a_est(a_est_raw);

  const bool is_rca = fs::exists(results / "labels_map.csv");
  if (!is_rca) {
    report.methods.push_back(score("FCLS", a_est, reconstruct_linear(m, a_est), a_true,
                                   image.data(), z_true));
  } else {
    const AbundanceMatrix a_fcls = fcls(image.data(), m).abundances;
    report.methods.push_back(score("FCLS", a_fcls, reconstruct_linear(m, a_fcls), a_true,
                                   image.data(), z_true));

    const LabelField z_hat = read_labels_csv(results / "labels_map.csv", classes);
    const Vector sigma2_hat = read_csv_vector(results / "sigma2.csv");
    const Vector s2_hat = read_csv_vector(results / "s2.csv");
    if (z_hat.width() != image.width() || z_hat.height() != image.height()) {
      throw DimensionMismatch("labels_map.csv does not match the image size");
    }
    if (sigma2_hat.size() != image.bands()) throw DimensionMismatch("sigma2.csv has the wrong length");
    if (s2_hat.size() != classes - 1) throw DimensionMismatch("s2.csv has the wrong length");

    const Matrix y_hat = reconstruct_rca(image.data(), m, a_est, z_hat, s2_hat, sigma2_hat);
    MethodReport r = score("RCA-SU", a_est, y_hat, a_true, image.data(), z_true);
    r.rnmse_by_estimate = rnmse_per_class(a_est.values(), a_true, z_hat);
    r.re_by_estimate = re_per_class(y_hat, image.data(), z_hat);
    r.confusion = confusion_and_accuracy(z_hat, z_true, s2_hat);
    r.scales = s2_hat;
    r.scale_errors = hyperparam_errors(s2_hat, s2_true);
    if (sigma2_true.size() == sigma2_hat.size()) r.noise_error = noise_relative_error(sigma2_hat, sigma2_true);
    report.methods.push_back(std::move(r));
  }

  ensure_dir(out);
  write_json(out / "report.json", to_json(report));
  {
    std::ofstream md(out / "report.md", std::ios::trunc);
    if (!md) throw IoError("cannot write " + (out / "report.md").string());
    md << to_markdown(report);
  }
  std::cout << "report -> " << (out / "report.json").string() << "\n";
  return kExitOk;
}

// render --------------------------------------------------------------------

struct RenderArgs {
  std::string labels;
  std::string abundances;
  int classes = 0;
  Index width = 0;
  std::string out;
};

void setup_render(CLI::App& root, RenderArgs& a) {
  auto* cmd = root.add_subcommand("render", "Render label or abundance maps as PGM");
  add_config(cmd);
  auto* lab = cmd->add_option("--labels", a.labels, "H x W label CSV")->check(CLI::ExistingFile);
  auto* ab = cmd->add_option("--abundances", a.abundances, "R x N abundance CSV")
                 ->check(CLI::ExistingFile);
  lab->excludes(ab);
  cmd->add_option("--classes", a.classes, "Class count (default: largest label + 1)");
  cmd->add_option("--width", a.width, "Image width (abundance maps)");
  cmd->add_option("--out", a.out, "PGM file for labels, directory for abundances")->required();
}

int run_render(const RenderArgs& a) {
  if (!a.labels.empty()) {
    int classes = a.classes;
    if (classes == 0) {
      const Matrix raw = read_csv_matrix(a.labels);
      classes = std::max(2, static_cast<int>(raw.maxCoeff()) + 1);
    }
    const LabelField z = read_labels_csv(a.labels, classes);
    write_pgm(a.out, render_labels(z));
    return kExitOk;
  }
  if (a.abundances.empty()) throw InvalidInput("one of --labels or --abundances is required");
  if (a.width <= 0) throw InvalidInput("--width is required for abundance maps");
  const Matrix values = read_csv_matrix(a.abundances);
  if (values.cols() % a.width != 0) {
    throw DimensionMismatch("pixel count " + std::to_string(values.cols()) +
                            " is not a multiple of the width");
  }
  const Index height = values.cols() / a.width;
  const fs::path out(a.out);
  ensure_dir(out);
  for (Index r = 0; r < values.rows(); ++r) {
    write_pgm(out / ("abundance_" + std::to_string(r + 1) + ".pgm"),
              render_abundance(values.row(r).transpose(), a.width, height));
  }
  return kExitOk;
}

}  // namespace

nlohmann::json to_json(const ScenarioSpec& spec) {
  nlohmann::json j;
  j["scenario"] = to_string(spec.scenario);
  j["width"] = spec.width;
  j["height"] = spec.height;
  j["bands"] = spec.bands;
  j["endmembers"] = spec.endmembers;
  j["classes"] = spec.classes;
  j["beta"] = spec.beta;
  j["neighborhood"] = neighborhood_name(spec.neighborhood);
  j["potts_sweeps"] = spec.potts_sweeps;
  if (spec.scenario == Scenario::RcaLevels) {
    j["s2"] = spec.rca_scales;
  } else {
    j["gbm_gamma_min"] = spec.gbm_gamma_min;
    j["gbm_gamma_max"] = spec.gbm_gamma_max;
    j["ppnmm_b"] = spec.ppnmm_b;
    j["rca_s2"] = spec.rca_scale;
  }
  j["noise"] = spec.noise.colored ? nlohmann::json("colored")
                                  : nlohmann::json({{"iid", spec.noise.variance}});
  j["seed"] = spec.seed;
  j["endmember_source"] = spec.endmember_file.empty() ? "synthetic-smooth" : spec.endmember_file;
  return j;
}

nlohmann::json to_json(const SamplerConfig& c) {
  return {{"iterations", c.iterations},
          {"burn_in", c.burn_in},
          {"classes", c.classes},
          {"beta", c.beta},
          {"gamma", c.gamma},
          {"nu", c.nu},
          {"neighborhood", neighborhood_name(c.neighborhood)},
          {"seed", c.seed},
          {"adapt_interval", c.adapt_interval},
          {"adapt_factor", c.adapt_factor},
          {"target_acceptance", c.target_acceptance},
          {"thinning", c.thinning},
          {"inner_sweeps", c.inner_sweeps},
          {"initial_noise_step", c.initial_noise_step},
          {"initial_scale_step", c.initial_scale_step},
          {"threads", c.threads},
          {"approximate_parallel_noise", c.approximate_parallel_noise}};
}

int threads_from_env() {
  const char* v = std::getenv("HSIU_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0 || n > 4096) {
    throw InvalidInput(std::string("HSIU_THREADS must be a nonnegative integer, got '") + v + "'");
  }
  return static_cast<int>(n);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Joint nonlinear unmixing and nonlinearity detection for hyperspectral images",
               "hsiu"};
  app.require_subcommand(1);
  GenerateArgs gen;
  UnmixArgs unmix;
  EvalArgs ev;
  RenderArgs render;
  setup_generate(app, gen);
  setup_unmix(app, unmix);
  setup_eval(app, ev);
  setup_render(app, render);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    apply_config(app.get_subcommands().front());
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (app.got_subcommand("generate")) return run_generate(gen);
    if (app.got_subcommand("unmix")) return run_unmix(unmix);
    if (app.got_subcommand("eval")) return run_eval(ev);
    return run_render(render);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> copy = args;
  std::vector<char*> argv;
  argv.reserve(copy.size() + 1);
  for (auto& s : copy) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run_cli(static_cast<int>(copy.size()), argv.data());
}

}  // namespace hsiu
