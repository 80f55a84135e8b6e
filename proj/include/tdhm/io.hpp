#pragma once

#include "tdhm/analysis.hpp"
#include "tdhm/types.hpp"

#include <string>
#include <vector>

namespace tdhm::io {

// Shortest decimal form that round-trips a double exactly (17 significant
// digits); infinities serialize as "inf"/"-inf".
std::string format_g17(double value);

// Groups file: comma-separated 0/1 rows, one group per line, optional first
// header row of node labels. A leading timestamp column is either announced
// by a first header cell named "time" or asserted by the caller for
// headerless files. Malformed rows raise ParseError with the line number.
GroupedData read_groups_file(const std::string& path, bool assume_time_column = false);
void write_groups_file(const std::string& path, const GroupedData& g);

// Params file: a small key-value document with u as one row and theta as an
// n-row block whose diagonal is the token "inf".
ModelParams read_params_file(const std::string& path);
void write_params_file(const std::string& path, const ModelParams& params);

// Raw multi-candidate records: optional "# nodes: a,b,c" header fixing the
// column order; one event per line as "time | cand | cand", candidates
// given as label lists or (with a nodes header) binary vectors.
RawRecords read_raw_records(const std::string& path);

Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Matrix& m);
void write_labels_file(const std::string& path, const std::vector<std::string>& labels);

}  // namespace tdhm::io
