#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nvar/baselines.hpp"
#include "nvar/errors.hpp"
#include "nvar/estimation.hpp"
#include "nvar/evaluation.hpp"
#include "nvar/geometry.hpp"
#include "nvar/ingest.hpp"
#include "nvar/io.hpp"
#include "nvar/model.hpp"
#include "nvar/rng.hpp"

namespace nvar::cli {

using json = nlohmann::json;

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::string config;
  std::string out_dir = ".";
};

struct SimulateOptions {
  int case_id = 1;
  std::size_t p = 100;
  std::size_t d0 = 1;
  double sigma = 1.0;
  std::size_t n = 200;
  std::size_t burn_in = kDefaultBurnIn;
};

struct FitOptions {
  std::string panel;
  std::string distance;
  std::string layout;
  std::string lattice;  // "1d" or "2d"
  std::string scale = "auto";
  std::string method = "nvar";
  std::string q_grid = "1";
  std::string radii = "auto";
  std::size_t tau_max = 0;  // 0 selects floor(p / 2)
  double c_n = 0.0;
  std::string ordering = "identity";
  bool prune = false;
  double train_fraction = 0.0;  // 0 fits on the whole panel
  std::size_t lambda_grid_size = 50;
  double lambda_ratio = 1e-3;
  double lambda = 0.0;  // > 0 fixes lambda instead of BIC selection
  std::string name;
};

struct PredictOptions {
  std::string panel;
  std::vector<std::string> models;
  double split = 0.8;
  std::size_t horizon = 0;  // 0 uses the whole test span
};

struct BenchOptions {
  std::string cases = "1";
  std::string p = "100";
  std::string d0 = "1";
  std::string sigma = "1";
  std::string n = "200";
  std::size_t reps = 50;
  std::string methods = "nvar,bvar,lasso";
  std::string radii = "0,1,2,3,4";
  double c_n = 0.0;
  std::string ordering;  // empty: identity, longitude for case 3
  bool trials = false;
};

struct IngestOptions {
  std::string records;
  std::string locations;
  bool lenient = false;
  bool no_center = false;
  double train_fraction = 0.8;
};

struct DistancesOptions {
  std::string layout;
  std::string adjacency;
  std::string lattice;
  std::size_t size = 0;  // p for 1d, side for 2d
  std::string scale = "auto";
  std::size_t tau_max = 0;
};

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_list(const std::string& text, const std::string& field) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = io::trim(item);
    require(!t.empty(), ErrorCode::InvalidArgument, field + ": empty list entry in '" + text + "'");
    out.emplace_back(t);
  }
  require(!out.empty(), ErrorCode::InvalidArgument, field + ": list is empty");
  return out;
}

inline std::vector<double> parse_reals(const std::string& text, const std::string& field) {
  std::vector<double> out;
  for (const auto& s : split_list(text, field)) {
    const auto v = io::try_parse_double(s);
    require(v && std::isfinite(*v), ErrorCode::InvalidArgument, field + ": '" + s + "' is not a finite number");
    out.push_back(*v);
  }
  return out;
}

inline std::vector<std::size_t> parse_counts(const std::string& text, const std::string& field) {
  std::vector<std::size_t> out;
  for (double v : parse_reals(text, field)) {
    require(v >= 0 && v == std::floor(v), ErrorCode::InvalidArgument,
            field + ": entries must be non-negative integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

inline DistanceScale parse_scale(const std::string& text) {
  if (text == "auto") return DistanceScale::automatic();
  const auto v = io::try_parse_double(text);
  require(v && std::isfinite(*v) && *v > 0, ErrorCode::InvalidArgument,
          "--scale: expected 'auto' or a positive number, got '" + text + "'");
  return DistanceScale::fixed(*v);
}

inline std::size_t perfect_square_side(std::size_t p) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p))));
  require(side * side == p, ErrorCode::InvalidArgument,
          "p must be a perfect square for the 2-D lattice (got " + std::to_string(p) + ")");
  return side;
}

/// Reorders a layout to the panel's series ids.
inline SensorLayout align_layout(const SensorLayout& layout, const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < layout.size(); ++k) index[layout.ids[k]] = k;
  SensorLayout out;
  out.ids = ids;
  std::vector<Point> pts;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    require(it != index.end(), ErrorCode::ShapeMismatch, "layout has no entry for series '" + id + "'");
    if (layout.coordinates) pts.push_back((*layout.coordinates)[it->second]);
  }
  if (layout.coordinates) out.coordinates = std::move(pts);
  return out;
}

inline std::filesystem::path output_path(const GlobalOptions& g, const std::string& file) {
  std::filesystem::create_directories(g.out_dir);
  return std::filesystem::path(g.out_dir) / file;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline void cmd_simulate(const GlobalOptions& g, const SimulateOptions& o, std::ostream& out) {
  require(o.case_id >= 1 && o.case_id <= 3, ErrorCode::InvalidArgument, "--case must be 1, 2 or 3");
  if (o.case_id == 2) perfect_square_side(o.p);
  const auto generated = generate_case(o.case_id, o.p, o.d0, derive_seed(g.seed, 1));
  const auto panel = simulate(generated.model, NoiseSpec{o.sigma}, o.n, o.burn_in, derive_seed(g.seed, 2));
  const auto panel_path = output_path(g, "panel.csv");
  const auto model_path = output_path(g, "model.json");
  io::write_panel_csv(panel_path.string(), panel);
  io::write_model_json(model_path.string(), generated.model,
                       {{"method", "truth"}, {"case", o.case_id}, {"sigma", o.sigma}, {"seed", g.seed}});
  out << "wrote " << panel_path.string() << "\nwrote " << model_path.string() << '\n';
  if (o.case_id == 3) {
    const auto layout_path = output_path(g, "layout.csv");
    io::write_layout_csv(layout_path.string(), generated.layout);
    out << "wrote " << layout_path.string() << '\n';
  }
}

inline void cmd_fit(const GlobalOptions& g, const FitOptions& o, std::ostream& out) {
  const Method method = parse_method(o.method);
  auto panel = io::read_panel_csv(o.panel);
  if (o.train_fraction > 0.0) {
    require(o.train_fraction < 1.0, ErrorCode::InvalidArgument, "--train-fraction must lie in (0, 1)");
    panel = split_train_test(panel, o.train_fraction, 1).train;
  }
  const std::size_t p = panel.p();
  const std::size_t tau_max = o.tau_max > 0 ? o.tau_max : default_tau_max(p);

  std::optional<SensorLayout> layout;
  if (!o.layout.empty()) layout = align_layout(io::read_layout_csv(o.layout), panel.ids);

  auto distance_source = [&]() -> DistanceMatrix {
    const int sources = !o.distance.empty() + !o.layout.empty() + !o.lattice.empty();
    require(sources == 1, ErrorCode::InvalidArgument,
            "fit needs exactly one distance source: --distance <csv>, --layout <csv> or --lattice 1d|2d");
    if (!o.distance.empty()) {
      auto d = io::read_distance_csv(o.distance);
      require(d.size() == p, ErrorCode::ShapeMismatch, "distance matrix size differs from panel");
      return d;
    }
    if (layout) return euclidean_distances(*layout, parse_scale(o.scale));
    if (o.lattice == "1d") return lattice1d_distances(p);
    require(o.lattice == "2d", ErrorCode::InvalidArgument, "--lattice must be 1d or 2d");
    return lattice2d_distances(perfect_square_side(p));
  };

  SelectionOptions sel;
  sel.c_n = o.c_n;
  sel.prune = o.prune;
  sel.threads = g.threads;
  const std::string name = o.name.empty() ? o.method : o.name;
  json meta{{"method", o.method}, {"train_columns", panel.n()}};

  if (method == Method::Lasso) {
    require(o.q_grid.find(',') == std::string::npos, ErrorCode::InvalidArgument,
            "lasso takes a single lag order in --q-grid");
    LassoConfig config;
    config.grid_size = o.lambda_grid_size;
    config.grid_ratio = o.lambda_ratio;
    config.c_n = o.c_n;
    if (o.lambda > 0.0) {
      config.selection = LassoSelection::Fixed;
      config.fixed_lambda = o.lambda;
    }
    const auto q = parse_counts(o.q_grid, "--q-grid").front();
    const auto fit = fit_lasso(panel, q, config, g.threads);
    meta["fit_seconds"] = fit.seconds;
    meta["estimate"] = nullptr;
    io::write_model_json(output_path(g, name + "_model.json").string(), fit.as_model(), meta);
    json report{{"method", "lasso"},
                {"q", q},
                {"series", panel.ids},
                {"chosen_lambda", fit.chosen_lambda},
                {"nonzero", fit.nonzero},
                {"converged", std::vector<bool>(fit.converged.begin(), fit.converged.end())},
                {"fit_seconds", fit.seconds}};
    io::write_json(output_path(g, name + "_report.json").string(), report);
    io::write_text(output_path(g, name + "_path.csv").string(), io::lasso_path_csv(fit, panel.ids));
    std::size_t total = 0;
    for (auto k : fit.nonzero) total += k;
    out << "lasso: " << total << " non-zero coefficients, " << std::fixed << std::setprecision(3)
        << fit.seconds << " s\n";
    return;
  }

  const auto q_grid = parse_counts(o.q_grid, "--q-grid");
  NvarFit fit;
  if (method == Method::Nvar) {
    const auto distance = distance_source();
    const auto radii = o.radii == "auto" ? candidate_radii(distance, tau_max) : parse_reals(o.radii, "--radii");
    fit = fit_nvar(panel, distance, q_grid, radii, sel);
  } else {
    const auto strategy = OrderingStrategy::of(parse_ordering(o.ordering));
    SensorLayout bvar_layout;
    if (layout) {
      bvar_layout = *layout;
    } else {
      require(strategy.kind == OrderingKind::Identity, ErrorCode::MissingCoordinates,
              "--ordering " + o.ordering + " needs --layout");
      bvar_layout.ids = panel.ids;
    }
    const auto band = o.radii == "auto" ? candidate_radii(lattice1d_distances(p), tau_max)
                                        : parse_reals(o.radii, "--radii");
    require(q_grid.size() == 1, ErrorCode::InvalidArgument, "bvar takes a single lag order in --q-grid");
    fit = fit_bvar(panel, bvar_layout, strategy, q_grid.front(), band, sel);
    meta["ordering"] = o.ordering;
  }
  meta["fit_seconds"] = fit.seconds;
  meta["estimate"] = fit.report.d_hat;
  io::write_model_json(output_path(g, name + "_model.json").string(), fit.model, meta);
  auto report = io::report_to_json(fit.report, panel.ids);
  report["method"] = o.method;
  report["fit_seconds"] = fit.seconds;
  io::write_json(output_path(g, name + "_report.json").string(), report);
  io::write_text(output_path(g, name + "_bic.csv").string(), io::bic_table_csv(fit.report, panel.ids));
  out << o.method << ": q = " << fit.report.q << ", d_hat = " << radius_label(fit.report.d_hat)
      << ", " << std::fixed << std::setprecision(3) << fit.seconds << " s\n";
}

struct PredictRow {
  std::string method;
  std::optional<double> estimate;
  double mspe = 0.0;
  std::optional<double> seconds;
};

inline std::vector<PredictRow> cmd_predict(const GlobalOptions& g, const PredictOptions& o, std::ostream& out) {
  require(!o.models.empty(), ErrorCode::InvalidArgument, "predict needs at least one --model");
  const auto panel = io::read_panel_csv(o.panel);
  std::vector<PredictRow> rows;
  for (const auto& path : o.models) {
    const auto doc = io::read_json(path);
    const auto model = io::model_from_json(doc);
    const std::size_t horizon = o.horizon > 0 ? o.horizon : max_horizon(panel.n(), o.split, model.q);
    require(horizon > 0, ErrorCode::InsufficientTestSpan, "test span is shorter than q + 1");
    PredictRow row;
    row.method = doc.contains("method") && doc["method"].is_string()
                     ? doc["method"].get<std::string>()
                     : std::filesystem::path(path).stem().string();
    if (doc.contains("estimate") && doc["estimate"].is_number()) row.estimate = doc["estimate"].get<double>();
    if (doc.contains("fit_seconds") && doc["fit_seconds"].is_number())
      row.seconds = doc["fit_seconds"].get<double>();
    row.mspe = mspe_one_step(model, panel, o.split, horizon);
    rows.push_back(std::move(row));
  }
  std::ostringstream csv;
  csv << "method,estimate,mspe,seconds\n";
  out << std::left << std::setw(10) << "method" << std::right << std::setw(10) << "estimate"
      << std::setw(14) << "MSPE" << std::setw(12) << "time(s)" << '\n';
  for (const auto& r : rows) {
    csv << r.method << ',' << (r.estimate ? io::format_double(*r.estimate) : "") << ','
        << io::format_double(r.mspe) << ',' << (r.seconds ? io::format_double(*r.seconds) : "") << '\n';
    std::ostringstream mspe, secs;
    mspe << std::fixed << std::setprecision(3) << r.mspe;
    if (r.seconds) secs << std::fixed << std::setprecision(3) << *r.seconds;
    out << std::left << std::setw(10) << r.method << std::right << std::setw(10)
        << (r.estimate ? radius_label(*r.estimate) : "-") << std::setw(14) << mspe.str() << std::setw(12)
        << (r.seconds ? secs.str() : "-") << '\n';
  }
  io::write_text(output_path(g, "mspe.csv").string(), csv.str());
  return rows;
}

inline void cmd_bench(const GlobalOptions& g, const BenchOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<Method> methods;
  for (const auto& m : split_list(o.methods, "--methods")) methods.push_back(parse_method(m));
  const auto radii = parse_reals(o.radii, "--radii");
  std::vector<SummaryTable> tables;
  for (auto case_id : parse_counts(o.cases, "--case"))
    for (auto p : parse_counts(o.p, "--p"))
      for (auto d0 : parse_counts(o.d0, "--d0"))
        for (double sigma : parse_reals(o.sigma, "--sigma"))
          for (auto n : parse_counts(o.n, "--n")) {
            MonteCarloConfig config;
            config.case_id = static_cast<int>(case_id);
            config.p = p;
            config.d0 = d0;
            config.sigma = sigma;
            config.n = n;
            config.reps = o.reps;
            config.methods = methods;
            config.seed = g.seed;
            config.radii = radii;
            config.c_n = o.c_n;
            config.threads = g.threads;
            if (!o.ordering.empty()) config.bvar_ordering = parse_ordering(o.ordering);
            std::ostringstream label;
            label << "case " << case_id << " p=" << p << " d0=" << d0 << " sigma=" << sigma << " n=" << n;
            tables.push_back(run_monte_carlo(config, [&](std::size_t done) {
              err << '\r' << label.str() << ": " << done << '/' << o.reps << std::flush;
            }));
            err << '\n';
          }
  io::write_text(output_path(g, "summary.csv").string(), io::summary_csv(tables));
  io::write_json(output_path(g, "summary.json").string(), io::summary_json(tables));
  const auto text = render_text(tables);
  io::write_text(output_path(g, "summary.txt").string(), text);
  if (o.trials) io::write_text(output_path(g, "trials.csv").string(), io::trials_csv(tables));
  out << text;
}

inline void cmd_ingest(const GlobalOptions& g, const IngestOptions& o, std::ostream& out, std::ostream& err) {
  const auto read = io::read_observations_csv(o.records, o.lenient);
  for (const auto& msg : read.skipped) err << "skipped " << msg << '\n';
  const auto grid = monthly_max_aggregate(read.records);
  const auto selection = select_complete_submatrix(grid);
  auto panel = extract_panel(grid, selection);

  json report{{"sites", panel.ids},
              {"p", panel.p()},
              {"n", panel.n()},
              {"score", selection.score()},
              {"first_month", panel.timestamps.front()},
              {"last_month", panel.timestamps.back()},
              {"grid_sites", grid.sites()},
              {"grid_months", grid.months},
              {"skipped_records", read.skipped.size()}};
  if (!o.no_center) {
    const auto cut = static_cast<std::size_t>(std::floor(o.train_fraction * static_cast<double>(panel.n())));
    require(o.train_fraction > 0.0 && o.train_fraction <= 1.0 && cut >= 1, ErrorCode::TooShort,
            "--train-fraction leaves no columns for the centering means");
    auto centered = center_series(panel, cut);
    panel = std::move(centered.panel);
    report["centered"] = true;
    report["mean_columns"] = cut;
    report["means"] = centered.means;
  } else {
    report["centered"] = false;
  }
  const auto panel_path = output_path(g, "panel.csv");
  io::write_panel_csv(panel_path.string(), panel);
  io::write_json(output_path(g, "selection.json").string(), report);
  if (!o.locations.empty()) {
    const auto layout = align_layout(io::read_layout_csv(o.locations), panel.ids);
    io::write_layout_csv(output_path(g, "layout.csv").string(), layout);
  }
  out << "selected p = " << panel.p() << " sites over n = " << panel.n() << " months ("
      << panel.timestamps.front() << " to " << panel.timestamps.back() << ")\n";
}

inline void cmd_distances(const GlobalOptions& g, const DistancesOptions& o, std::ostream& out) {
  const int sources = !o.layout.empty() + !o.adjacency.empty() + !o.lattice.empty();
  require(sources == 1, ErrorCode::InvalidArgument,
          "distances needs exactly one source: --layout <csv>, --adjacency <csv> or --lattice 1d|2d");
  DistanceMatrix d;
  if (!o.layout.empty()) {
    d = euclidean_distances(io::read_layout_csv(o.layout), parse_scale(o.scale));
  } else if (!o.adjacency.empty()) {
    SensorLayout layout;
    layout.adjacency = io::read_adjacency_csv(o.adjacency);
    layout.ids = default_ids(layout.adjacency->size());
    d = graph_shortest_path_distances(layout);
  } else {
    require(o.size >= 1, ErrorCode::InvalidArgument, "--size is required with --lattice");
    require(o.lattice == "1d" || o.lattice == "2d", ErrorCode::InvalidArgument, "--lattice must be 1d or 2d");
    d = o.lattice == "1d" ? lattice1d_distances(o.size) : lattice2d_distances(o.size);
  }
  const auto path = output_path(g, "distance.csv");
  io::write_distance_csv(path.string(), d);
  const auto radii = candidate_radii(d, o.tau_max > 0 ? o.tau_max : default_tau_max(d.size()));
  out << "wrote " << path.string() << " (p = " << d.size() << ")\ncandidate radii:";
  for (double r : radii) out << ' ' << io::format_double(r);
  out << '\n';
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

namespace detail {

inline bool takes_value(const CLI::Option* opt) { return opt->get_expected_min() > 0; }

/// Index of the subcommand token, skipping values of global options.
inline std::size_t find_subcommand(const std::vector<std::string>& args, CLI::App& app) {
  for (std::size_t k = 0; k < args.size(); ++k) {
    const auto& a = args[k];
    if (a.rfind("-", 0) == 0) {
      if (a.find('=') != std::string::npos) continue;
      const auto* opt = app.get_option_no_throw(a);
      if (opt && takes_value(opt)) ++k;
      continue;
    }
    return k;
  }
  return args.size();
}

inline std::string config_value(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return io::format_double(v.get<double>());
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) out += (out.empty() ? "" : ",") + config_value(e, key);
    return out;
  }
  fail(ErrorCode::InvalidArgument, "config key '" + key + "' must be a string, number, boolean or list");
}

/// Config entries as argument lists for the global app and for the subcommand.
inline std::pair<std::vector<std::string>, std::vector<std::string>> config_args(
    const json& doc, CLI::App& app, CLI::App* sub) {
  require(doc.is_object(), ErrorCode::InvalidArgument, "config file must hold a JSON object");
  std::vector<std::string> global, local;
  for (const auto& [key, value] : doc.items()) {
    require(key != "config", ErrorCode::InvalidArgument, "config files cannot nest --config");
    const std::string flag = "--" + key;
    CLI::Option* opt = sub ? sub->get_option_no_throw(flag) : nullptr;
    auto* target = &local;
    if (!opt) {
      opt = app.get_option_no_throw(flag);
      target = &global;
    }
    require(opt != nullptr, ErrorCode::InvalidArgument,
            "config key '" + key + "' is not an option of '" + (sub ? sub->get_name() : "nvar") + "'");
    if (!takes_value(opt)) {
      require(value.is_boolean(), ErrorCode::InvalidArgument, "config key '" + key + "' must be true or false");
      if (value.get<bool>()) target->push_back(flag);
      continue;
    }
    if (value.is_array() && opt->get_items_expected_max() > 1) {
      for (const auto& e : value) {
        target->push_back(flag);
        target->push_back(config_value(e, key));
      }
      continue;
    }
    target->push_back(flag);
    target->push_back(config_value(value, key));
  }
  return {global, local};
}

}  // namespace detail

/// Runs the command line (without the program name); returns the process exit code.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Neighborhood vector autoregression toolkit", "nvar"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Master random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all available)")->capture_default_str();
  app.add_option("--config", g.config, "JSON file of option defaults; flags override it");
  app.add_option("--out-dir", g.out_dir, "Directory for output files")->capture_default_str();

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Generate a case model and simulate a panel");
  simulate_cmd->add_option("--case", sim.case_id, "Simulation case: 1, 2 or 3")->capture_default_str();
  simulate_cmd->add_option("--p", sim.p, "Number of series")->capture_default_str();
  simulate_cmd->add_option("--d0", sim.d0, "True neighborhood radius")->capture_default_str();
  simulate_cmd->add_option("--sigma", sim.sigma, "Innovation standard deviation")->capture_default_str();
  simulate_cmd->add_option("--n", sim.n, "Panel length")->capture_default_str();
  simulate_cmd->add_option("--burn-in", sim.burn_in, "Discarded warm-up steps")->capture_default_str();

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit NVAR, BVAR or LASSO to a panel");
  fit_cmd->add_option("--panel", fit.panel, "Panel CSV")->required();
  fit_cmd->add_option("--distance", fit.distance, "Square distance CSV");
  fit_cmd->add_option("--layout", fit.layout, "Layout CSV (id,x,y[,z] or site_id,longitude,latitude)");
  fit_cmd->add_option("--lattice", fit.lattice, "Lattice metric: 1d or 2d");
  fit_cmd->add_option("--scale", fit.scale, "Euclidean scale for --layout: auto or a factor")->capture_default_str();
  fit_cmd->add_option("--method", fit.method, "nvar, bvar or lasso")->capture_default_str();
  fit_cmd->add_option("--q-grid", fit.q_grid, "Comma-separated lag orders")->capture_default_str();
  fit_cmd->add_option("--radii", fit.radii, "auto or comma-separated radii / bandwidths")->capture_default_str();
  fit_cmd->add_option("--tau-max", fit.tau_max, "Neighborhood size cap for auto radii (0 = p/2)");
  fit_cmd->add_option("--c-n", fit.c_n, "BIC penalty multiplier (0 = default)");
  fit_cmd->add_option("--ordering", fit.ordering, "BVAR ordering: identity, longitude, latitude, pca1, pca2")
      ->capture_default_str();
  fit_cmd->add_flag("--prune", fit.prune, "Greedy backward BIC pruning of each row");
  fit_cmd->add_option("--train-fraction", fit.train_fraction, "Fit on this leading fraction of the panel");
  fit_cmd->add_option("--lambda-grid-size", fit.lambda_grid_size, "LASSO path length")->capture_default_str();
  fit_cmd->add_option("--lambda-ratio", fit.lambda_ratio, "Smallest / largest lambda")->capture_default_str();
  fit_cmd->add_option("--lambda", fit.lambda, "Fixed LASSO lambda (disables BIC selection)");
  fit_cmd->add_option("--name", fit.name, "Output file prefix (default: method)");

  PredictOptions pred;
  auto* predict_cmd = app.add_subcommand("predict", "One-step-ahead MSPE of fitted models");
  predict_cmd->add_option("--panel", pred.panel, "Panel CSV")->required();
  predict_cmd->add_option("--model", pred.models, "Model JSON (repeatable)")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  predict_cmd->add_option("--split", pred.split, "Training fraction")->capture_default_str();
  predict_cmd->add_option("--horizon", pred.horizon, "Prediction steps (0 = whole test span)");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Monte Carlo benchmark over a parameter grid");
  bench_cmd->add_option("--case", bench.cases, "Comma-separated cases")->capture_default_str();
  bench_cmd->add_option("--p", bench.p, "Comma-separated series counts")->capture_default_str();
  bench_cmd->add_option("--d0", bench.d0, "Comma-separated true radii")->capture_default_str();
  bench_cmd->add_option("--sigma", bench.sigma, "Comma-separated noise levels")->capture_default_str();
  bench_cmd->add_option("--n", bench.n, "Comma-separated panel lengths")->capture_default_str();
  bench_cmd->add_option("--reps", bench.reps, "Replications per configuration")->capture_default_str();
  bench_cmd->add_option("--methods", bench.methods, "Comma-separated methods")->capture_default_str();
  bench_cmd->add_option("--radii", bench.radii, "Radii and bandwidths searched")->capture_default_str();
  bench_cmd->add_option("--c-n", bench.c_n, "BIC penalty multiplier (0 = default)");
  bench_cmd->add_option("--ordering", bench.ordering, "BVAR ordering override");
  bench_cmd->add_flag("--trials", bench.trials, "Also write per-replication results");

  IngestOptions ing;
  auto* ingest_cmd = app.add_subcommand("ingest", "Monthly-max aggregation and complete-submatrix selection");
  ingest_cmd->add_option("--records", ing.records, "Records CSV (site_id,date,value)")->required();
  ingest_cmd->add_option("--locations", ing.locations, "Locations CSV (site_id,longitude,latitude)");
  ingest_cmd->add_flag("--lenient", ing.lenient, "Skip unparseable records instead of failing");
  ingest_cmd->add_flag("--no-center", ing.no_center, "Keep raw values instead of centering");
  ingest_cmd->add_option("--train-fraction", ing.train_fraction, "Columns used for centering means")
      ->capture_default_str();

  DistancesOptions dist;
  auto* distances_cmd = app.add_subcommand("distances", "Build a distance matrix CSV");
  distances_cmd->add_option("--layout", dist.layout, "Layout CSV");
  distances_cmd->add_option("--adjacency", dist.adjacency, "0/1 adjacency CSV");
  distances_cmd->add_option("--lattice", dist.lattice, "1d or 2d");
  distances_cmd->add_option("--size", dist.size, "Lattice p (1d) or side (2d)");
  distances_cmd->add_option("--scale", dist.scale, "Euclidean scale: auto or a factor")->capture_default_str();
  distances_cmd->add_option("--tau-max", dist.tau_max, "Neighborhood size cap for reported radii");

  try {
    // Config entries go ahead of the user's flags so the flags win under TakeLast.
    std::string config_path;
    for (std::size_t k = 0; k < args.size(); ++k) {
      if (args[k] == "--config" && k + 1 < args.size()) config_path = args[k + 1];
      if (args[k].rfind("--config=", 0) == 0) config_path = args[k].substr(9);
    }
    if (!config_path.empty()) {
      const auto pos = detail::find_subcommand(args, app);
      CLI::App* sub = pos < args.size() ? app.get_subcommand_no_throw(args[pos]) : nullptr;
      auto [global, local] = detail::config_args(io::read_json(config_path), app, sub);
      std::vector<std::string> merged = global;
      merged.insert(merged.end(), args.begin(), args.begin() + static_cast<std::ptrdiff_t>(std::min(pos + 1, args.size())));
      merged.insert(merged.end(), local.begin(), local.end());
      if (pos + 1 < args.size()) merged.insert(merged.end(), args.begin() + static_cast<std::ptrdiff_t>(pos + 1), args.end());
      args = std::move(merged);
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*simulate_cmd) cmd_simulate(g, sim, out);
    if (*fit_cmd) cmd_fit(g, fit, out);
    if (*predict_cmd) cmd_predict(g, pred, out);
    if (*bench_cmd) cmd_bench(g, bench, out, err);
    if (*ingest_cmd) cmd_ingest(g, ing, out, err);
    if (*distances_cmd) cmd_distances(g, dist, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace nvar::cli
