#pragma once

#include <map>
#include <optional>
#include <string>

#include "cspcr/types.hpp"

namespace cspcr {

// Parsed data file: header `y,x,z_1..z_p,v_1..v_d` plus optional extra
// columns (e.g. a precomputed weight column `w`). Comma separated, '.'
// decimal, no missing cells.
struct DataFile {
  SourceDataset dataset;
  std::map<std::string, Eigen::VectorXd> extra_columns;
};

DataFile read_data_csv(const std::string& path);

// Pool file: `x,z_1..z_p,v_1..v_d`; a `y` column is accepted and ignored.
UnlabeledPool read_pool_csv(const std::string& path, Population population);

// Writers used by the CLI round-trip tests and the simulate command.
std::string dataset_to_csv(const SourceDataset& dataset,
                           const Eigen::VectorXd* weights = nullptr);
std::string pool_to_csv(const UnlabeledPool& pool);

void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace cspcr
