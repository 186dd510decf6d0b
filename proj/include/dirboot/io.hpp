#pragma once

// CSV and JSON persistence. Doubles are written with %.17g so files
// round-trip exactly.

#include "dirboot/bootstrap.hpp"
#include "dirboot/empirical_law.hpp"
#include "dirboot/functionals.hpp"
#include "dirboot/grid_function.hpp"
#include "dirboot/inference.hpp"
#include "dirboot/quantile_sim.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace dirboot {

/// Malformed or incomplete input files (a usage error, not a pipeline failure).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_double(double value);

/// Header names and the numeric body of a CSV file.
struct CsvTable {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;

  Eigen::Index column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Columns atom,prob; or a single column of sample values (uniform weights).
EmpiricalLaw read_law_csv(const std::filesystem::path& path);
void write_law_csv(const std::filesystem::path& path, const EmpiricalLaw& law);

/// Columns knot,value,weight.
GridFunction read_grid_function_csv(const std::filesystem::path& path);
void write_grid_function_csv(const std::filesystem::path& path, const GridFunction& f);

/// Long format draw,component,value.
void write_ensemble_csv(const std::filesystem::path& path, const BootstrapEnsemble& ensemble);

/// Columns shift_id,bl_distance,noise_floor,indistinguishable.
void write_probe_csv(const std::filesystem::path& path, const std::vector<ProbeRow>& rows);

struct HalfspaceList {
  Eigen::MatrixXd normals;
  Eigen::VectorXd offsets;
};

/// One constraint a'x <= b per row: columns a1..ad, b.
HalfspaceList read_halfspaces_csv(const std::filesystem::path& path);

/// Columns Y, D, Z1..Zk (any k >= 0, consecutive from 1).
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Monte Carlo cells, one per row:
/// row,table,n,C,kappa,alpha,delta,rejection_rate,std_error,reps,failures.
void write_table_csv(const std::filesystem::path& path, const std::vector<TableCell>& cells);

nlohmann::json to_json(const SeedManifest& manifest);
nlohmann::json to_json(const TestReport& report);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace dirboot
