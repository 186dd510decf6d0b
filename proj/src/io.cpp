#include "dirboot/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

namespace dirboot {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw InputError(path.string() + ":" + std::to_string(line) + ": not a number: '" + text + "'");
  }
  return value;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void require_columns(const CsvTable& table, const std::vector<std::string>& names,
                     const std::filesystem::path& path) {
  std::string missing;
  for (const auto& name : names) {
    if (table.column(name) < 0) missing += (missing.empty() ? "" : ", ") + name;
  }
  if (!missing.empty()) {
    std::string have;
    for (const auto& c : table.columns) have += (have.empty() ? "" : ", ") + c;
    throw InputError(path.string() + ": missing column(s) " + missing + " (found: " + have + ")");
  }
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

Eigen::Index CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] == name) return static_cast<Eigen::Index>(k);
  }
  return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (table.columns.empty()) {
      table.columns = fields;
      continue;
    }
    if (fields.size() != table.columns.size()) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(table.columns.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_number(f, path, line_no));
    rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw InputError(path.string() + ": empty file");
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  auto out = open_output(path);
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    out << (c ? "," : "") << table.columns[c];
  }
  out << '\n';
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      out << (c ? "," : "") << format_double(table.values(r, c));
    }
    out << '\n';
  }
}

EmpiricalLaw read_law_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  if (table.values.rows() == 0) throw InputError(path.string() + ": no rows");
  const auto n = static_cast<std::size_t>(table.values.rows());
  if (table.columns.size() == 1) {
    std::vector<double> atoms(n);
    for (std::size_t i = 0; i < n; ++i) atoms[i] = table.values(static_cast<Eigen::Index>(i), 0);
    return EmpiricalLaw(std::move(atoms));
  }
  require_columns(table, {"atom", "prob"}, path);
  std::vector<double> atoms(n);
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    atoms[i] = table.values(static_cast<Eigen::Index>(i), table.column("atom"));
    probs[i] = table.values(static_cast<Eigen::Index>(i), table.column("prob"));
  }
  try {
    return EmpiricalLaw(std::move(atoms), std::move(probs));
  } catch (const std::invalid_argument& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_law_csv(const std::filesystem::path& path, const EmpiricalLaw& law) {
  auto out = open_output(path);
  out << "atom,prob\n";
  for (std::size_t i = 0; i < law.size(); ++i) {
    out << format_double(law.atoms()[i]) << ',' << format_double(law.probs()[i]) << '\n';
  }
}

GridFunction read_grid_function_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  require_columns(table, {"knot", "value", "weight"}, path);
  try {
    return GridFunction(table.values.col(table.column("knot")),
                        table.values.col(table.column("value")),
                        table.values.col(table.column("weight")));
  } catch (const std::invalid_argument& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_grid_function_csv(const std::filesystem::path& path, const GridFunction& f) {
  auto out = open_output(path);
  out << "knot,value,weight\n";
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    out << format_double(f.grid()(i)) << ',' << format_double(f.values()(i)) << ','
        << format_double(f.weights()(i)) << '\n';
  }
}

void write_ensemble_csv(const std::filesystem::path& path, const BootstrapEnsemble& ensemble) {
  auto out = open_output(path);
  out << "draw,component,value\n";
  const Eigen::MatrixXd& draws = ensemble.draws();
  for (Eigen::Index b = 0; b < draws.rows(); ++b) {
    for (Eigen::Index k = 0; k < draws.cols(); ++k) {
      out << b << ',' << k << ',' << format_double(draws(b, k)) << '\n';
    }
  }
}

void write_probe_csv(const std::filesystem::path& path, const std::vector<ProbeRow>& rows) {
  auto out = open_output(path);
  out << "shift_id,bl_distance,noise_floor,indistinguishable\n";
  for (const ProbeRow& row : rows) {
    out << row.shift_id << ',' << format_double(row.bl_distance) << ','
        << format_double(row.noise_floor) << ',' << (row.indistinguishable ? 1 : 0) << '\n';
  }
}

HalfspaceList read_halfspaces_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const Eigen::Index d = static_cast<Eigen::Index>(table.columns.size()) - 1;
  if (d < 1) throw InputError(path.string() + ": expected columns a1..ad, b");
  std::vector<std::string> names;
  for (Eigen::Index k = 1; k <= d; ++k) names.push_back("a" + std::to_string(k));
  names.emplace_back("b");
  require_columns(table, names, path);
  if (table.values.rows() == 0) throw InputError(path.string() + ": no constraints");
  HalfspaceList list;
  list.normals.resize(table.values.rows(), d);
  for (Eigen::Index k = 0; k < d; ++k) {
    list.normals.col(k) = table.values.col(table.column("a" + std::to_string(k + 1)));
  }
  list.offsets = table.values.col(table.column("b"));
  return list;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  require_columns(table, {"Y", "D"}, path);
  Eigen::Index k = 0;
  while (table.column("Z" + std::to_string(k + 1)) >= 0) ++k;
  if (static_cast<Eigen::Index>(table.columns.size()) != k + 2) {
    throw InputError(path.string() + ": expected columns Y, D, Z1..Zk with consecutive Z indices");
  }
  Dataset data;
  data.y = table.values.col(table.column("Y"));
  data.treatment = table.values.col(table.column("D"));
  data.covariates.resize(table.values.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    data.covariates.col(j) = table.values.col(table.column("Z" + std::to_string(j + 1)));
  }
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return data;
}

void write_table_csv(const std::filesystem::path& path, const std::vector<TableCell>& cells) {
  auto out = open_output(path);
  out << "row,table,n,C,kappa,alpha,delta,rejection_rate,std_error,reps,failures\n";
  char rate[64];
  char se[64];
  for (const TableCell& c : cells) {
    std::snprintf(rate, sizeof rate, "%.6f", c.rejection_rate);
    std::snprintf(se, sizeof se, "%.6f", c.std_error);
    if (c.theoretical) {
      out << "theoretical," << c.table << ",,,," << format_double(c.alpha) << ','
          << format_double(c.delta) << ',' << rate << ',' << se << ',' << c.reps << ','
          << c.failures << '\n';
    } else {
      out << "bandwidth," << c.table << ',' << c.n << ',' << format_double(c.scale) << ','
          << format_double(c.kappa) << ',' << format_double(c.alpha) << ','
          << format_double(c.delta) << ',' << rate << ',' << se << ',' << c.reps << ','
          << c.failures << '\n';
    }
  }
}

nlohmann::json to_json(const SeedManifest& manifest) {
  nlohmann::json j;
  j["master_seed"] = manifest.master_seed;
  j["scheme"] = manifest.scheme;
  j["draws"] = manifest.draws;
  j["sample_size"] = manifest.sample_size;
  j["rate"] = manifest.rate;
  j["extra"] = manifest.extra;
  return j;
}

nlohmann::json to_json(const TestReport& report) {
  nlohmann::json j;
  j["statistic"] = report.statistic;
  j["critical_value"] = report.critical_value;
  j["alpha"] = report.alpha;
  j["delta_bump"] = report.delta_bump;
  j["reject"] = report.reject;
  j["p_value"] = report.p_value;
  j["seed_manifest"] = to_json(report.seed_manifest);
  j["diagnostics"] = report.diagnostics;
  j["flags"] = report.flags;
  return j;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
  auto out = open_output(path);
  out << value.dump(2) << '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
}

}  // namespace dirboot
