#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qptv2/error.hpp"

namespace qptv2 {

// Paired predictions and ground-truth scores.
struct ScoreTable {
  std::vector<double> prediction;
  std::vector<double> mos;

  std::size_t size() const { return prediction.size(); }
  void validate() const;
};

double plcc(const ScoreTable& t);
double srcc(const ScoreTable& t);
double plcc(const std::vector<double>& x, const std::vector<double>& y);
double srcc(const std::vector<double>& x, const std::vector<double>& y);

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(const std::vector<double>& v);

struct SplitProtocol {
  int n_splits = 10;
  double train_frac = 0.8;
  std::uint64_t base_seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Deterministic per (base_seed, split index): round(train_frac * n) training
// items, the rest for testing.
std::vector<Split> make_splits(std::size_t n, const SplitProtocol& protocol);

struct SplitResult {
  int index = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double srcc = 0.0;
  double plcc = 0.0;
};

struct ProtocolReport {
  std::vector<SplitResult> splits;
  double mean_srcc = 0.0;
  double mean_plcc = 0.0;

  nlohmann::json to_json() const;
};

// `train` receives the training indices and returns a predictor; the predictor
// maps a dataset index to a score.
using Predictor = std::function<double(std::size_t)>;
using TrainFn = std::function<Predictor(const std::vector<std::size_t>& train, int split_index)>;

ProtocolReport run_split_protocol(const std::vector<double>& mos, const SplitProtocol& protocol, const TrainFn& train);

ProtocolReport report_from_json(const nlohmann::json& j);

struct TableRow {
  std::string label;
  double srcc = 0.0;
  double plcc = 0.0;
};

// Markdown table with one SRCC/PLCC column pair.
std::string render_markdown_table(const std::string& header, const std::vector<TableRow>& rows);

}  // namespace qptv2
