#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nvar/baselines.hpp"
#include "nvar/errors.hpp"
#include "nvar/estimation.hpp"
#include "nvar/evaluation.hpp"
#include "nvar/geometry.hpp"
#include "nvar/ingest.hpp"
#include "nvar/matrix.hpp"
#include "nvar/model.hpp"

namespace nvar::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Text primitives
// ---------------------------------------------------------------------------

/// 17 significant digits; non-finite values as inf, -inf, nan.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> try_parse_double(std::string_view s) {
  s = trim(s);
  if (s == "inf" || s == "Inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Non-blank lines with their 1-based line numbers.
struct Line {
  std::size_t number;
  std::string text;
};

inline std::vector<Line> read_lines(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
  std::vector<Line> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (number == 1 && text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
    if (!trim(text).empty()) lines.push_back({number, text});
  }
  return lines;
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write '" + path + "'");
  out << content;
  require(static_cast<bool>(out), ErrorCode::Io, "write to '" + path + "' failed");
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::Schema, "'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_json(const std::string& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

namespace detail {

inline double cell(const std::vector<std::string>& fields, std::size_t k, const std::string& path,
                   std::size_t line) {
  const auto v = try_parse_double(fields[k]);
  require(v.has_value(), ErrorCode::Schema,
          path + ":" + std::to_string(line) + ": field " + std::to_string(k + 1) + " ('" + fields[k] +
              "') is not a number");
  return *v;
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_from(const json& v, const std::string& what) {
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  require(v.is_number(), ErrorCode::Schema, what + " must be a number or null");
  return v.get<double>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Panels: rows = time, columns = series, header = ids (optional leading time column)
// ---------------------------------------------------------------------------

inline std::string panel_to_csv(const SeriesPanel& panel) {
  std::ostringstream os;
  const bool timed = !panel.timestamps.empty();
  if (timed) os << "time,";
  for (std::size_t i = 0; i < panel.p(); ++i) os << (i ? "," : "") << panel.ids[i];
  os << '\n';
  for (std::size_t t = 0; t < panel.n(); ++t) {
    if (timed) os << panel.timestamps[t] << ',';
    for (std::size_t i = 0; i < panel.p(); ++i) os << (i ? "," : "") << format_double(panel(i, t));
    os << '\n';
  }
  return os.str();
}

inline void write_panel_csv(const std::string& path, const SeriesPanel& panel) {
  write_text(path, panel_to_csv(panel));
}

inline SeriesPanel read_panel_csv(const std::string& path) {
  const auto lines = read_lines(path);
  require(!lines.empty(), ErrorCode::Schema, "'" + path + "' is empty");
  auto header = split_csv(lines.front().text);
  const bool timed = !header.empty() && header.front() == "time";
  if (timed) header.erase(header.begin());
  require(!header.empty(), ErrorCode::Schema, "'" + path + "' header names no series");
  for (const auto& id : header) {
    require(!id.empty(), ErrorCode::Schema, "'" + path + "' header has an empty series id");
    // Numeric ids (gauge numbers) are fine once a time column marks the header.
    require(timed || !try_parse_double(id).has_value(), ErrorCode::Schema,
            "'" + path + "' has no header row (first line is numeric)");
  }
  const std::size_t p = header.size(), n = lines.size() - 1;
  require(n >= 1, ErrorCode::Schema, "'" + path + "' has a header but no rows");
  DenseMatrix values(p, n);
  std::vector<std::string> times;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& line = lines[t + 1];
    auto fields = split_csv(line.text);
    require(fields.size() == p + (timed ? 1 : 0), ErrorCode::Schema,
            path + ":" + std::to_string(line.number) + ": expected " +
                std::to_string(p + (timed ? 1 : 0)) + " fields, found " + std::to_string(fields.size()));
    if (timed) {
      times.push_back(fields.front());
      fields.erase(fields.begin());
    }
    for (std::size_t i = 0; i < p; ++i) values(i, t) = detail::cell(fields, i, path, line.number);
  }
  return SeriesPanel(std::move(values), std::move(header), std::move(times));
}

// ---------------------------------------------------------------------------
// Models: {p, q, radius, distance, coeffs}; infinite entries as null
// ---------------------------------------------------------------------------

inline json model_to_json(const NvarModel& model) {
  model.validate_shape();
  json distance = json::array();
  for (double d : model.distance.entries()) distance.push_back(detail::number_or_null(d));
  json coeffs = json::array();
  for (const auto& a : model.coeffs) coeffs.push_back(a.values());
  return {{"p", model.p},
          {"q", model.q},
          {"radius", detail::number_or_null(model.radius)},
          {"distance", std::move(distance)},
          {"coeffs", std::move(coeffs)}};
}

inline NvarModel model_from_json(const json& doc) {
  require(doc.is_object(), ErrorCode::Schema, "model document must be a JSON object");
  for (const char* key : {"p", "q", "radius", "distance", "coeffs"})
    require(doc.contains(key), ErrorCode::Schema, std::string("model document lacks '") + key + "'");
  require(doc["p"].is_number_unsigned() && doc["q"].is_number_unsigned(), ErrorCode::Schema,
          "model 'p' and 'q' must be non-negative integers");
  NvarModel model;
  model.p = doc["p"].get<std::size_t>();
  model.q = doc["q"].get<std::size_t>();
  model.radius = detail::number_from(doc["radius"], "model 'radius'");
  const auto& dist = doc["distance"];
  require(dist.is_array() && dist.size() == model.p * model.p, ErrorCode::Schema,
          "model 'distance' must hold p * p entries");
  std::vector<double> entries;
  for (const auto& v : dist) entries.push_back(detail::number_from(v, "distance entry"));
  model.distance = DistanceMatrix(model.p, std::move(entries));
  const auto& coeffs = doc["coeffs"];
  require(coeffs.is_array() && coeffs.size() == model.q, ErrorCode::Schema,
          "model 'coeffs' must hold q matrices");
  for (const auto& a : coeffs) {
    require(a.is_array() && a.size() == model.p * model.p, ErrorCode::Schema,
            "each coefficient matrix must hold p * p entries");
    std::vector<double> vals;
    for (const auto& v : a) {
      require(v.is_number(), ErrorCode::Schema, "coefficient entries must be numbers");
      vals.push_back(v.get<double>());
    }
    model.coeffs.emplace_back(model.p, model.p, std::move(vals));
  }
  model.validate_shape();
  return model;
}

inline void write_model_json(const std::string& path, const NvarModel& model, const json& extra = {}) {
  auto doc = model_to_json(model);
  if (extra.is_object()) doc.update(extra);
  write_json(path, doc);
}

inline NvarModel read_model_json(const std::string& path) { return model_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Distances, layouts, adjacency
// ---------------------------------------------------------------------------

inline void write_distance_csv(const std::string& path, const DistanceMatrix& d) {
  std::ostringstream os;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.size(); ++j) os << (j ? "," : "") << format_double(d(i, j));
    os << '\n';
  }
  write_text(path, os.str());
}

/// Square numeric CSV, no header; "inf" marks unreachable pairs.
inline DistanceMatrix read_distance_csv(const std::string& path) {
  const auto lines = read_lines(path);
  const std::size_t p = lines.size();
  require(p >= 1, ErrorCode::Schema, "'" + path + "' is empty");
  std::vector<double> entries;
  entries.reserve(p * p);
  for (const auto& line : lines) {
    const auto fields = split_csv(line.text);
    require(fields.size() == p, ErrorCode::Schema,
            path + ":" + std::to_string(line.number) + ": distance matrix must be square (" +
                std::to_string(p) + " columns expected)");
    for (std::size_t k = 0; k < p; ++k) entries.push_back(detail::cell(fields, k, path, line.number));
  }
  return DistanceMatrix(p, std::move(entries));
}

/// Header `id,x,y[,z]` or `site_id,longitude,latitude`.
inline SensorLayout read_layout_csv(const std::string& path) {
  const auto lines = read_lines(path);
  require(!lines.empty(), ErrorCode::Schema, "'" + path + "' is empty");
  const auto header = split_csv(lines.front().text);
  const bool xy = header.size() >= 3 && header[0] == "id" && header[1] == "x" && header[2] == "y" &&
                  (header.size() == 3 || (header.size() == 4 && header[3] == "z"));
  const bool geo = header.size() == 3 && header[0] == "site_id" && header[1] == "longitude" &&
                   header[2] == "latitude";
  require(xy || geo, ErrorCode::Schema,
          "'" + path + "' header must be 'id,x,y[,z]' or 'site_id,longitude,latitude'");
  SensorLayout layout;
  std::vector<Point> pts;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto fields = split_csv(lines[k].text);
    require(fields.size() == header.size(), ErrorCode::Schema,
            path + ":" + std::to_string(lines[k].number) + ": expected " +
                std::to_string(header.size()) + " fields");
    layout.ids.push_back(fields[0]);
    Point pt;
    for (std::size_t c = 1; c < fields.size(); ++c)
      pt.push_back(detail::cell(fields, c, path, lines[k].number));
    pts.push_back(std::move(pt));
  }
  require(!pts.empty(), ErrorCode::Schema, "'" + path + "' lists no sites");
  layout.coordinates = std::move(pts);
  layout.validate();
  return layout;
}

inline void write_layout_csv(const std::string& path, const SensorLayout& layout) {
  require(layout.coordinates.has_value(), ErrorCode::MissingCoordinates, "layout has no coordinates");
  std::ostringstream os;
  const std::size_t dim = layout.dimension();
  os << "id,x,y" << (dim == 3 ? ",z" : "") << '\n';
  for (std::size_t i = 0; i < layout.size(); ++i) {
    os << layout.ids[i];
    for (double c : (*layout.coordinates)[i]) os << ',' << format_double(c);
    os << '\n';
  }
  write_text(path, os.str());
}

/// Square 0/1 CSV, no header.
inline std::vector<std::vector<bool>> read_adjacency_csv(const std::string& path) {
  const auto lines = read_lines(path);
  const std::size_t p = lines.size();
  require(p >= 1, ErrorCode::Schema, "'" + path + "' is empty");
  std::vector<std::vector<bool>> adj(p, std::vector<bool>(p, false));
  for (std::size_t i = 0; i < p; ++i) {
    const auto fields = split_csv(lines[i].text);
    require(fields.size() == p, ErrorCode::Schema,
            path + ":" + std::to_string(lines[i].number) + ": adjacency matrix must be square");
    for (std::size_t j = 0; j < p; ++j) {
      require(fields[j] == "0" || fields[j] == "1", ErrorCode::Schema,
              path + ":" + std::to_string(lines[i].number) + ": adjacency entries must be 0 or 1");
      adj[i][j] = fields[j] == "1";
    }
  }
  return adj;
}

// ---------------------------------------------------------------------------
// Observation records: header `site_id,date,value`
// ---------------------------------------------------------------------------

struct RecordReadResult {
  std::vector<ObservationRecord> records;
  std::vector<std::string> skipped;  // messages for records dropped under lenient parsing
};

inline RecordReadResult read_observations_csv(const std::string& path, bool lenient = false) {
  const auto lines = read_lines(path);
  require(!lines.empty(), ErrorCode::NoCompleteCell, "'" + path + "' holds no records");
  const auto header = split_csv(lines.front().text);
  require(header == std::vector<std::string>{"site_id", "date", "value"}, ErrorCode::Schema,
          "'" + path + "' header must be 'site_id,date,value'");
  RecordReadResult out;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& line = lines[k];
    const auto fields = split_csv(line.text);
    std::string problem;
    ObservationRecord rec;
    if (fields.size() != 3) {
      problem = "expected 3 fields, found " + std::to_string(fields.size());
    } else if (fields[0].empty()) {
      problem = "empty site_id";
    } else if (const auto date = parse_iso_date(fields[1]); !date) {
      problem = "date '" + fields[1] + "' is not YYYY-MM-DD";
    } else if (const auto value = try_parse_double(fields[2]); !value || !std::isfinite(*value)) {
      problem = "value '" + fields[2] + "' is not a finite number";
    } else {
      rec = {fields[0], *date, *value};
    }
    if (!problem.empty()) {
      const std::string msg = path + ":" + std::to_string(line.number) + ": " + problem;
      require(lenient, ErrorCode::UnparseableRecord, msg);
      out.skipped.push_back(msg);
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline std::string to_string(CellStatus s) {
  switch (s) {
    case CellStatus::Fitted: return "fitted";
    case CellStatus::InsufficientData: return "insufficient_data";
    case CellStatus::RankDeficient: return "rank_deficient";
  }
  return "fitted";
}

inline json report_to_json(const FitReport& report, const std::vector<std::string>& ids) {
  json bic = json::array(), status = json::array();
  for (std::size_t r = 0; r < report.radii.size(); ++r) {
    json row = json::array(), srow = json::array();
    for (std::size_t i = 0; i < report.bic_table[r].size(); ++i) {
      row.push_back(detail::number_or_null(report.bic_table[r][i]));
      srow.push_back(to_string(report.cell_status[r][i]));
    }
    bic.push_back(std::move(row));
    status.push_back(std::move(srow));
  }
  json coeffs = json::array();
  for (const auto& a : report.coeffs) coeffs.push_back(a.values());
  json selected = json::array();
  for (double r : report.selected_radius) selected.push_back(detail::number_or_null(r));
  return {{"q", report.q},
          {"c_n", report.c_n},
          {"radii", report.radii},
          {"d_hat", detail::number_or_null(report.d_hat)},
          {"series", ids},
          {"selected_radius", std::move(selected)},
          {"fitted_radius", report.fitted_radius},
          {"capped_series", report.capped_series},
          {"bic_table", std::move(bic)},
          {"cell_status", std::move(status)},
          {"criterion", detail::number_or_null(report.criterion)},
          {"coeffs", std::move(coeffs)}};
}

/// One row per series, one column per candidate radius; skipped cells empty.
inline std::string bic_table_csv(const FitReport& report, const std::vector<std::string>& ids) {
  std::ostringstream os;
  os << "series";
  for (double r : report.radii) os << ",d=" << format_double(r);
  os << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    os << ids[i];
    for (std::size_t r = 0; r < report.radii.size(); ++r) {
      const double b = report.bic_table[r][i];
      os << ',' << (std::isnan(b) ? std::string() : format_double(b));
    }
    os << '\n';
  }
  return os.str();
}

inline std::string lasso_path_csv(const LassoFit& fit, const std::vector<std::string>& ids) {
  std::ostringstream os;
  os << "series,lambda,nonzero,bic\n";
  for (const auto& pt : fit.path)
    os << ids[pt.series] << ',' << format_double(pt.lambda) << ',' << pt.nonzero << ','
       << format_double(pt.bic) << '\n';
  return os.str();
}

inline std::string summary_csv(const std::vector<SummaryTable>& tables) {
  std::ostringstream os;
  os << "case,p,d0,sigma,n,method,reps,completed,failures,mean_l2,sd_l2,mean_frob,sd_frob,histogram\n";
  for (const auto& t : tables)
    for (const auto& m : t.methods) {
      std::string hist;
      for (const auto& [r, c] : m.histogram) hist += (hist.empty() ? "" : ";") + radius_label(r) + ":" + std::to_string(c);
      os << t.case_id << ',' << t.p << ',' << t.d0 << ',' << format_double(t.sigma) << ',' << t.n << ','
         << to_string(m.method) << ',' << m.reps << ',' << m.completed << ',' << m.failures << ','
         << format_double(m.mean_l2) << ',' << format_double(m.sd_l2) << ','
         << format_double(m.mean_frob) << ',' << format_double(m.sd_frob) << ',' << hist << '\n';
    }
  return os.str();
}

inline json summary_json(const std::vector<SummaryTable>& tables) {
  json out = json::array();
  for (const auto& t : tables) {
    json methods = json::array();
    for (const auto& m : t.methods) {
      json hist = json::object();
      for (const auto& [r, c] : m.histogram) hist[radius_label(r)] = c;
      methods.push_back({{"method", to_string(m.method)},
                         {"reps", m.reps},
                         {"completed", m.completed},
                         {"failures", m.failures},
                         {"mean_l2", m.mean_l2},
                         {"sd_l2", m.sd_l2},
                         {"mean_frob", m.mean_frob},
                         {"sd_frob", m.sd_frob},
                         {"histogram", std::move(hist)}});
    }
    out.push_back({{"case", t.case_id},
                   {"p", t.p},
                   {"d0", t.d0},
                   {"sigma", t.sigma},
                   {"n", t.n},
                   {"seed", t.seed},
                   {"methods", std::move(methods)}});
  }
  return out;
}

/// Raw per-replication results, including wall-clock seconds.
inline std::string trials_csv(const std::vector<SummaryTable>& tables) {
  std::ostringstream os;
  os << "case,p,d0,sigma,n,replication,method,estimate,l2,frob,seconds,failure\n";
  for (const auto& t : tables)
    for (const auto& r : t.trials) {
      std::string failure = r.failure;
      for (auto& ch : failure)
        if (ch == ',' || ch == '\n') ch = ';';
      os << t.case_id << ',' << t.p << ',' << t.d0 << ',' << format_double(t.sigma) << ',' << t.n << ','
         << r.replication << ',' << to_string(r.method) << ','
         << (std::isnan(r.estimate) ? std::string() : format_double(r.estimate)) << ','
         << (r.failed ? std::string() : format_double(r.l2)) << ','
         << (r.failed ? std::string() : format_double(r.frob)) << ',' << format_double(r.seconds) << ','
         << failure << '\n';
    }
  return os.str();
}

}  // namespace nvar::io
