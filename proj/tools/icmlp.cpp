#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "icmlp/icmlp.hpp"

using namespace icmlp;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failed = 1;
constexpr int exit_usage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::size_t thread_count() {
  const char* env = std::getenv("ICMLP_THREADS");
  if (!env || !*env) return 1;
  try {
    const long n = std::stol(env);
    return n > 0 ? static_cast<std::size_t>(n) : 1;
  } catch (const std::exception&) {
    throw UsageError(std::string("ICMLP_THREADS must be a positive integer, got '") + env + "'");
  }
}

std::vector<double> split_numbers(const std::string& text, char sep, const std::string& what) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && item[used] == ' ') ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in " + what);
    }
  }
  return out;
}

/// "a,b" or "a,b;c,d;..."
Box parse_domain(const std::string& text) {
  Box box;
  std::stringstream in(text);
  std::string axis;
  while (std::getline(in, axis, ';')) {
    const auto ends = split_numbers(axis, ',', "--domain");
    if (ends.size() != 2) throw UsageError("--domain axes are written lo,hi; got '" + axis + "'");
    box.axes.push_back({ends[0], ends[1]});
  }
  try {
    box.validate();
  } catch (const StructuralError& e) {
    throw UsageError(std::string("--domain: ") + e.what());
  }
  return box;
}

std::vector<std::size_t> parse_widths(const std::string& text, std::size_t depth) {
  std::vector<std::size_t> widths;
  for (double w : split_numbers(text, ',', "--widths")) {
    if (!(w >= 1) || w != static_cast<double>(static_cast<std::size_t>(w))) {
      throw UsageError("--widths entries must be positive integers");
    }
    widths.push_back(static_cast<std::size_t>(w));
  }
  if (widths.size() == 1 && depth > 1) widths.assign(depth, widths.front());
  if (depth != widths.size()) {
    throw UsageError("--depth " + std::to_string(depth) + " does not match " + std::to_string(widths.size()) +
                     " widths");
  }
  return widths;
}

Activation parse_activation(const std::string& text) {
  try {
    return Activation::parse(text);
  } catch (const StructuralError& e) {
    throw UsageError(std::string("--activation: ") + e.what());
  }
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

std::vector<std::string> axis_columns(std::size_t dim) {
  if (dim == 1) return {"x"};
  std::vector<std::string> cols;
  for (std::size_t k = 0; k < dim; ++k) cols.push_back("x" + std::to_string(k + 1));
  return cols;
}

// eval

struct EvalArgs {
  std::string model;
  std::string domain;
  std::size_t grid = 0;
  std::string points;
  std::string out;
};

int run_eval(const EvalArgs& args) {
  const VectorNet net = load_model(args.model);
  const std::size_t n = net.input_dim();
  std::vector<std::vector<double>> inputs;
  if (!args.points.empty()) {
    const CsvTable table = parse_csv(read_file(args.points), args.points);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (table.rows[r].size() != n) {
        throw LoadError(args.points, "row " + std::to_string(r + 1) + " has " + std::to_string(table.rows[r].size()) +
                                         " coordinates, model expects " + std::to_string(n));
      }
      inputs.push_back(table.rows[r]);
    }
  } else {
    if (args.domain.empty() || args.grid == 0) throw UsageError("eval needs --points or both --domain and --grid");
    const Box box = parse_domain(args.domain);
    if (box.dim() != n) throw UsageError("--domain has " + std::to_string(box.dim()) + " axes, model expects " +
                                         std::to_string(n));
    const BoxGrid grid(box, args.grid);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      grid.point(i, x);
      inputs.push_back(x);
    }
  }
  std::vector<std::vector<double>> rows;
  for (auto& x : inputs) {
    const double h = net(x);
    x.push_back(h);
    rows.push_back(std::move(x));
  }
  auto cols = axis_columns(n);
  cols.push_back("H");
  emit(args.out, table_to_csv(cols, rows));
  return exit_ok;
}

// approximate

struct ApproximateArgs {
  std::string target;
  std::string table;
  std::string domain;
  double tol = 0.05;
  std::string activation = "tanh";
  std::size_t grid = 0;
  unsigned max_degree = 64;
  std::size_t max_nodes = 65536;
  std::string out;
  std::string certificate_out;
  std::string errors_out;
};

void write_errors(const std::string& path, const VectorNet& net, const Target& f, const Box& box,
                  const std::vector<std::size_t>& points) {
  const BoxGrid grid(box, points);
  std::vector<std::vector<double>> rows;
  rows.reserve(grid.size());
  std::vector<double> x(box.dim());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.point(i, x);
    const double fx = f(x);
    const double hx = net(x);
    std::vector<double> row = x;
    row.insert(row.end(), {fx, hx, hx - fx});
    rows.push_back(std::move(row));
  }
  auto cols = axis_columns(box.dim());
  cols.insert(cols.end(), {"f", "H", "err"});
  write_file(path, table_to_csv(cols, rows));
}

int run_approximate(const ApproximateArgs& args) {
  if (args.target.empty() == args.table.empty()) throw UsageError("approximate needs exactly one of --target, --table");
  if (!(args.tol > 0.0)) throw UsageError("--tol must be positive");
  const Activation activation = parse_activation(args.activation);
  NamedTarget target;
  if (!args.table.empty()) {
    const CsvTable table = parse_csv(read_file(args.table), args.table);
    std::vector<std::pair<double, double>> samples;
    for (const auto& row : table.rows) {
      if (row.size() != 2) throw LoadError(args.table, "table targets have two columns (x, f)");
      samples.emplace_back(row[0], row[1]);
    }
    try {
      target = table_target(std::move(samples));
    } catch (const StructuralError& e) {
      throw LoadError(args.table, e.what());
    }
  } else {
    try {
      target = named_target(args.target);
    } catch (const StructuralError& e) {
      throw UsageError(e.what());
    }
  }
  Box domain = target.domain;
  if (!args.domain.empty()) domain = parse_domain(args.domain);
  if (domain.dim() != target.domain.dim()) {
    throw UsageError("target " + target.name + " takes " + std::to_string(target.domain.dim()) + " coordinates");
  }

  ApproxRequest req{target.function, domain, args.tol, {}};
  req.budget.max_degree = args.max_degree;
  req.budget.max_nodes = args.max_nodes;
  req.budget.probe_points = args.grid;
  ConstructionOptions options;
  options.threads = thread_count();

  std::optional<VectorNet> net;
  Certificate cert;
  int status = exit_ok;
  try {
    ApproxResult result = approximate(req, activation, options);
    net = std::move(result.net);
    cert = std::move(result.certificate);
  } catch (const NonlinearityRequiredError& e) {
    std::cerr << "icmlp: " << e.what() << "\n";
    return exit_failed;
  } catch (const BudgetExhaustedError& e) {
    std::cerr << "icmlp: tolerance not met: " << e.what() << "\n";
    cert = e.best();
    net = e.net();
    status = exit_failed;
  }

  std::printf("target %s  activation %s  tol %g\n", target.name.c_str(), activation.to_string().c_str(), args.tol);
  std::printf("achieved sup error %.6g on %zu grid points per axis (%s)\n", cert.achieved_sup_error,
              cert.grid_points.empty() ? std::size_t{0} : cert.grid_points.front(), cert.met() ? "met" : "NOT met");
  std::printf("ledger: truncation %.3g  composition %.3g  square unit %.3g  quadrature %.3g  bound %.3g\n",
              cert.ledger.polynomial_truncation, cert.ledger.composition, cert.ledger.second_difference,
              cert.ledger.quadrature, cert.claimed_bound);
  if (net) {
    std::printf("network: depth %zu, %zu neurons, %zu stored inter-layer weights\n", net->depth(),
                net->neuron_count(), net->stored_weight_count());
  }

  if (!args.certificate_out.empty()) write_file(args.certificate_out, certificate_to_json(cert).dump(1) + "\n");
  if (net) {
    if (!args.out.empty()) save_model(*net, args.out);
    if (!args.errors_out.empty()) write_errors(args.errors_out, *net, target.function, domain, cert.grid_points);
  }
  return status;
}

// train / compare

struct TrainArgs {
  std::string data;
  std::string activation = "tanh";
  std::size_t depth = 2;
  std::string widths = "8";
  double lr = 0.05;
  std::size_t steps = 2000;
  std::size_t batch = 32;
  std::uint64_t seed = 42;
  std::string optimizer = "plain";
  std::string out;
  std::string loss_out;
};

TrainConfig train_config(const TrainArgs& args) {
  TrainConfig config;
  config.learning_rate = args.lr;
  config.steps = args.steps;
  config.batch = args.batch;
  config.seed = args.seed;
  if (args.optimizer == "plain") {
    config.optimizer = Optimizer::plain;
  } else if (args.optimizer == "momentum") {
    config.optimizer = Optimizer::momentum;
  } else {
    throw UsageError("--optimizer must be plain or momentum");
  }
  if (!(config.learning_rate >= 0.0) || config.batch == 0) throw UsageError("--lr must be >= 0 and --batch > 0");
  return config;
}

int run_train(const TrainArgs& args) {
  const TrainConfig config = train_config(args);
  const Activation activation = parse_activation(args.activation);
  const std::vector<std::size_t> widths = args.depth == 0 ? std::vector<std::size_t>{} : parse_widths(args.widths, args.depth);
  const Dataset data = load_dataset(args.data);
  const VectorNet start = init_net<VectorNet>(activation, data.input_dim, widths, config.seed);
  const FitResult<vector_input> fitted = fit(start, data, config);

  std::vector<std::vector<double>> rows;
  for (std::size_t s = 0; s < fitted.loss.size(); ++s) rows.push_back({static_cast<double>(s), fitted.loss[s]});
  if (!args.loss_out.empty()) write_file(args.loss_out, table_to_csv({"step", "loss"}, rows));
  if (!args.out.empty()) save_model(fitted.net, args.out);
  std::printf("initial mse %.6g  final mse %.6g  (%zu steps)\n", fitted.loss.front(), fitted.loss.back(), config.steps);
  return exit_ok;
}

int run_compare(const TrainArgs& args) {
  const TrainConfig config = train_config(args);
  const Activation activation = parse_activation(args.activation);
  if (args.depth == 0) throw UsageError("compare needs --depth >= 1: a standard MLP has a hidden layer");
  const std::vector<std::size_t> widths = parse_widths(args.widths, args.depth);
  const Dataset data = load_dataset(args.data);
  const VectorNet start = init_net<VectorNet>(activation, data.input_dim, widths, config.seed);
  const auto ic = fit(start, data, config);
  const auto standard = fit(zero_skips(start), data, config, standard_mask(start));

  std::vector<std::vector<double>> rows;
  for (std::size_t s = 0; s < ic.loss.size(); ++s) {
    rows.push_back({static_cast<double>(s), ic.loss[s], standard.loss[s]});
  }
  const std::string csv = table_to_csv({"step", "icmlp", "standard"}, rows);
  if (args.loss_out.empty() && args.out.empty()) {
    std::cout << csv;
  } else {
    write_file(args.loss_out.empty() ? args.out : args.loss_out, csv);
  }
  std::fprintf(stderr, "final mse: icmlp %.6g  standard %.6g\n", ic.loss.back(), standard.loss.back());
  return exit_ok;
}

// verify

struct VerifyArgs {
  std::string suite;
  std::string activation;
  std::uint64_t seed = 1;
  std::size_t trials = 200;
};

int run_verify(const VerifyArgs& args) {
  std::vector<std::string> suites;
  if (args.suite == "all") {
    for (auto s : suite_names()) suites.emplace_back(s);
  } else {
    bool known = false;
    for (auto s : suite_names()) known = known || s == args.suite;
    if (!known) {
      std::string list;
      for (auto s : suite_names()) list += " " + std::string(s);
      throw UsageError("unknown suite '" + args.suite + "'; suites:" + list + " all");
    }
    suites.push_back(args.suite);
  }
  bool ok = true;
  for (const auto& name : suites) {
    SuiteOptions options;
    options.seed = args.seed;
    options.trials = args.trials;
    if (!args.activation.empty()) {
      options.activation = parse_activation(args.activation);
    } else if (name == "affine-collapse") {
      options.activation = Activation::affine(2.0, 1.0);
    }
    const SuiteReport r = run_suite(name, options);
    std::printf("%s %s  trials %zu  max deviation %.3e  tolerance %.0e%s%s\n", r.passed ? "PASS" : "FAIL",
                r.name.c_str(), r.trials, r.max_deviation, r.tolerance, r.detail.empty() ? "" : "  ",
                r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? exit_ok : exit_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Input-connected MLPs: evaluation, constructive approximation, training and self-checks"};
  app.require_subcommand(1);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a grid or on listed points; CSV of (x..., H)");
  eval_cmd->add_option("--model", eval.model, "Model file")->required();
  eval_cmd->add_option("--domain", eval.domain, "Box as lo,hi[;lo,hi...]");
  eval_cmd->add_option("--grid", eval.grid, "Points per axis");
  eval_cmd->add_option("--points", eval.points, "CSV with one point per row");
  eval_cmd->add_option("--out", eval.out, "Output CSV (default stdout)");

  ApproximateArgs approx;
  auto* approx_cmd = app.add_subcommand("approximate", "Build a certified approximating network");
  approx_cmd->add_option("--target", approx.target, "sin3x, abs, runge or sincosxy");
  approx_cmd->add_option("--table", approx.table, "CSV of (x, f) samples, interpolated piecewise-linearly");
  approx_cmd->add_option("--domain", approx.domain, "Box as lo,hi[;lo,hi...]");
  approx_cmd->add_option("--tol", approx.tol, "Sup-norm tolerance")->capture_default_str();
  approx_cmd->add_option("--activation", approx.activation, "relu, tanh, sigmoid, softplus, identity, affine:A,B")
      ->capture_default_str();
  approx_cmd->add_option("--grid", approx.grid, "Certification points per axis (default 2000 in 1-D, 200 otherwise)");
  approx_cmd->add_option("--max-degree", approx.max_degree, "Chebyshev degree budget per axis")->capture_default_str();
  approx_cmd->add_option("--max-nodes", approx.max_nodes, "Quadrature node budget")->capture_default_str();
  approx_cmd->add_option("--out", approx.out, "Model file");
  approx_cmd->add_option("--certificate-out", approx.certificate_out, "Certificate JSON");
  approx_cmd->add_option("--errors-out", approx.errors_out, "Per-grid-point error CSV");

  TrainArgs train;
  auto add_train_options = [&](CLI::App* cmd) {
    cmd->add_option("--data", train.data, "CSV dataset; last column is the target")->required();
    cmd->add_option("--activation", train.activation, "Activation")->capture_default_str();
    cmd->add_option("--depth", train.depth, "Hidden layers")->capture_default_str();
    cmd->add_option("--widths", train.widths, "Comma-separated widths, or one width for every layer")
        ->capture_default_str();
    cmd->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
    cmd->add_option("--steps", train.steps, "Gradient steps")->capture_default_str();
    cmd->add_option("--batch", train.batch, "Minibatch size")->capture_default_str();
    cmd->add_option("--seed", train.seed, "splitmix64 seed")->capture_default_str();
    cmd->add_option("--optimizer", train.optimizer, "plain or momentum")->capture_default_str();
  };
  auto* train_cmd = app.add_subcommand("train", "Fit a network to a dataset by minibatch gradient descent");
  add_train_options(train_cmd);
  train_cmd->add_option("--out", train.out, "Model file");
  train_cmd->add_option("--loss-out", train.loss_out, "Loss trace CSV");
  auto* compare_cmd =
      app.add_subcommand("compare", "Train an IC-MLP and its skip-zeroed standard-MLP twin from the same init");
  add_train_options(compare_cmd);
  compare_cmd->add_option("--out,--loss-out", train.loss_out, "Side-by-side loss CSV (default stdout)");

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run an invariant self-check suite");
  verify_cmd->add_option("--suite", verify.suite,
                         "affine-collapse, pad-depth, linear-combine, reparam, compose, gradient-check or all")
      ->required();
  verify_cmd->add_option("--activation", verify.activation, "Activation (default tanh; affine:2,1 for affine-collapse)");
  verify_cmd->add_option("--seed", verify.seed, "splitmix64 seed")->capture_default_str();
  verify_cmd->add_option("--trials", verify.trials, "Random trials")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    if (*eval_cmd) return run_eval(eval);
    if (*approx_cmd) return run_approximate(approx);
    if (*train_cmd) return run_train(train);
    if (*compare_cmd) return run_compare(train);
    if (*verify_cmd) return run_verify(verify);
  } catch (const UsageError& e) {
    std::cerr << "icmlp: " << e.what() << "\n";
    return exit_usage;
  } catch (const LoadError& e) {
    std::cerr << "icmlp: " << e.what() << "\n";
    return exit_usage;
  } catch (const DivergenceError& e) {
    std::cerr << "icmlp: " << e.what() << "\n";
    return exit_failed;
  } catch (const std::exception& e) {
    std::cerr << "icmlp: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}
