#include "qptv2/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "qptv2/random.hpp"

namespace qptv2 {

void ScoreTable::validate() const {
  if (prediction.size() != mos.size()) throw ParameterError("score table columns differ in length");
  if (prediction.size() < 2) throw ParameterError("correlation needs at least 2 pairs");
  for (std::size_t i = 0; i < size(); ++i) {
    if (!std::isfinite(prediction[i]) || !std::isfinite(mos[i])) throw ParameterError("score table has non-finite values");
  }
}

double plcc(const std::vector<double>& x, const std::vector<double>& y) {
  ScoreTable{x, y}.validate();
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw CorrelationError("correlation undefined: a column has zero variance");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double srcc(const std::vector<double>& x, const std::vector<double>& y) {
  ScoreTable{x, y}.validate();
  return plcc(average_ranks(x), average_ranks(y));
}

double plcc(const ScoreTable& t) { return plcc(t.prediction, t.mos); }
double srcc(const ScoreTable& t) { return srcc(t.prediction, t.mos); }

std::vector<Split> make_splits(std::size_t n, const SplitProtocol& protocol) {
  if (protocol.n_splits < 1) throw ProtocolError("n_splits must be >= 1");
  if (!(protocol.train_frac > 0.0 && protocol.train_frac < 1.0)) throw ProtocolError("train_frac must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::lround(protocol.train_frac * double(n)));
  if (n_train > n || n - n_train < 2) {
    throw ProtocolError("degenerate split: " + std::to_string(n) + " items leave fewer than 2 for testing");
  }
  std::vector<Split> out;
  for (int s = 0; s < protocol.n_splits; ++s) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(protocol.base_seed, {static_cast<std::uint64_t>(s)}));
    std::shuffle(idx.begin(), idx.end(), rng);
    Split sp;
    sp.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    sp.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(sp.train.begin(), sp.train.end());
    std::sort(sp.test.begin(), sp.test.end());
    out.push_back(std::move(sp));
  }
  return out;
}

ProtocolReport run_split_protocol(const std::vector<double>& mos, const SplitProtocol& protocol, const TrainFn& train) {
  const std::vector<Split> splits = make_splits(mos.size(), protocol);
  ProtocolReport report;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const Predictor predict = train(splits[s].train, static_cast<int>(s));
    ScoreTable table;
    for (std::size_t i : splits[s].test) {
      table.prediction.push_back(predict(i));
      table.mos.push_back(mos[i]);
    }
    SplitResult r;
    r.index = static_cast<int>(s);
    r.n_train = splits[s].train.size();
    r.n_test = splits[s].test.size();
    r.srcc = srcc(table);
    r.plcc = plcc(table);
    report.splits.push_back(r);
    report.mean_srcc += r.srcc;
    report.mean_plcc += r.plcc;
  }
  report.mean_srcc /= double(report.splits.size());
  report.mean_plcc /= double(report.splits.size());
  return report;
}

nlohmann::json ProtocolReport::to_json() const {
  nlohmann::json j;
  j["splits"] = nlohmann::json::array();
  for (const auto& s : splits) {
    j["splits"].push_back(
        {{"index", s.index}, {"n_train", s.n_train}, {"n_test", s.n_test}, {"srcc", s.srcc}, {"plcc", s.plcc}});
  }
  j["n_splits"] = splits.size();
  j["mean_srcc"] = mean_srcc;
  j["mean_plcc"] = mean_plcc;
  return j;
}

ProtocolReport report_from_json(const nlohmann::json& j) {
  ProtocolReport r;
  for (const auto& s : j.at("splits")) {
    r.splits.push_back({s.at("index").get<int>(), s.at("n_train").get<std::size_t>(), s.at("n_test").get<std::size_t>(),
                        s.at("srcc").get<double>(), s.at("plcc").get<double>()});
  }
  r.mean_srcc = j.at("mean_srcc").get<double>();
  r.mean_plcc = j.at("mean_plcc").get<double>();
  return r;
}

std::string render_markdown_table(const std::string& header, const std::vector<TableRow>& rows) {
  std::ostringstream os;
  os << "| " << header << " | SRCC | PLCC |\n";
  os << "|---|---:|---:|\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows) os << "| " << r.label << " | " << r.srcc << " | " << r.plcc << " |\n";
  return os.str();
}

}  // namespace qptv2
