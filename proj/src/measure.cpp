#include "hwq/measure.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace hwq {

std::size_t HistogramSpec::cells() const {
  std::size_t c = 1;
  for (std::size_t b : bins) c *= b;
  return c;
}

std::size_t HistogramSpec::index(std::span<const double> x) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (!(x[i] >= lo[i] && x[i] < hi[i])) return cells();
    auto k = static_cast<std::size_t>((x[i] - lo[i]) / (hi[i] - lo[i]) * static_cast<double>(bins[i]));
    if (k >= bins[i]) k = bins[i] - 1;
    idx = idx * bins[i] + k;
  }
  return idx;
}

std::pair<Vec, Vec> HistogramSpec::cell_bounds(std::size_t cell) const {
  const std::size_t m = bins.size();
  Vec a(m), b(m);
  for (std::size_t ii = m; ii-- > 0;) {
    const std::size_t k = cell % bins[ii];
    cell /= bins[ii];
    const double w = (hi[ii] - lo[ii]) / static_cast<double>(bins[ii]);
    a[ii] = lo[ii] + w * static_cast<double>(k);
    b[ii] = a[ii] + w;
  }
  return {a, b};
}

HistogramSpec HistogramSpec::uniform(std::size_t m, double lo, double hi, std::size_t bins) {
  return HistogramSpec{Vec(m, lo), Vec(m, hi), std::vector<std::size_t>(m, bins)};
}

EmpiricalMeasure::EmpiricalMeasure(std::size_t m, MeasureOptions opts) : m_(m), opts_(std::move(opts)) {
  if (opts_.batches == 0) opts_.batches = 1;
  if (opts_.histogram) {
    const auto& h = *opts_.histogram;
    if (h.lo.size() != m || h.hi.size() != m || h.bins.size() != m)
      throw PreconditionError("measure: histogram box dimension mismatch");
    for (std::size_t i = 0; i < m; ++i)
      if (!(h.hi[i] > h.lo[i]) || h.bins[i] == 0) throw PreconditionError("measure: empty histogram box");
  }
  batches_.resize(opts_.batches);
  for (auto& b : batches_) {
    b.coord.assign(m, 0.0);
    if (opts_.histogram) b.cells.assign(opts_.histogram->cells() + 1, 0.0);
  }
  exp_acc_.assign(opts_.exp_rates.size(), 0.0);
  gauss_acc_.assign(opts_.gauss_rates.size(), 0.0);
}

void EmpiricalMeasure::add(std::span<const double> x, double weight, std::size_t batch) {
  Batch& b = batches_[std::min(batch, batches_.size() - 1)];
  const double n1 = l1_norm(x);
  b.w += weight;
  b.neg += weight * std::max(-hwq::sum(x), 0.0);
  b.l1 += weight * n1;
  for (std::size_t i = 0; i < m_; ++i) b.coord[i] += weight * x[i];
  if (opts_.histogram) b.cells[opts_.histogram->index(x)] += weight;
  for (std::size_t k = 0; k < exp_acc_.size(); ++k) exp_acc_[k] += weight * std::exp(opts_.exp_rates[k] * n1);
  for (std::size_t k = 0; k < gauss_acc_.size(); ++k) gauss_acc_[k] += weight * std::exp(opts_.gauss_rates[k] * n1 * n1);
}

void EmpiricalMeasure::add_sample(std::span<const double> x, double weight) {
  samples_.insert(samples_.end(), x.begin(), x.end());
  sample_w_.push_back(weight);
}

void EmpiricalMeasure::merge(const EmpiricalMeasure& o) {
  if (m_ == 0 && batches_.empty()) {
    *this = o;
    return;
  }
  if (o.m_ != m_ || o.batches_.size() != batches_.size() || o.exp_acc_.size() != exp_acc_.size() ||
      o.gauss_acc_.size() != gauss_acc_.size())
    throw PreconditionError("measure: merging incompatible measures");
  for (std::size_t k = 0; k < batches_.size(); ++k) {
    Batch& a = batches_[k];
    const Batch& b = o.batches_[k];
    a.w += b.w;
    a.neg += b.neg;
    a.l1 += b.l1;
    for (std::size_t i = 0; i < m_; ++i) a.coord[i] += b.coord[i];
    for (std::size_t c = 0; c < a.cells.size(); ++c) a.cells[c] += b.cells[c];
  }
  for (std::size_t k = 0; k < exp_acc_.size(); ++k) exp_acc_[k] += o.exp_acc_[k];
  for (std::size_t k = 0; k < gauss_acc_.size(); ++k) gauss_acc_[k] += o.gauss_acc_[k];
  samples_.insert(samples_.end(), o.samples_.begin(), o.samples_.end());
  sample_w_.insert(sample_w_.end(), o.sample_w_.begin(), o.sample_w_.end());
}

double EmpiricalMeasure::total_weight() const {
  double w = 0.0;
  for (const auto& b : batches_) w += b.w;
  return w;
}

MeanSE EmpiricalMeasure::batch_stat(const std::function<double(const Batch&)>& num) const {
  // Point estimate uses all weight; the standard error comes from the spread of batch means.
  double w = 0.0, s = 0.0;
  Vec means;
  for (const auto& b : batches_) {
    w += b.w;
    s += num(b);
    if (b.w > 0.0) means.push_back(num(b) / b.w);
  }
  MeanSE r = batch_mean_se(means);
  r.mean = w > 0.0 ? s / w : 0.0;
  return r;
}

MeanSE EmpiricalMeasure::neg_sum() const {
  return batch_stat([](const Batch& b) { return b.neg; });
}

MeanSE EmpiricalMeasure::l1() const {
  return batch_stat([](const Batch& b) { return b.l1; });
}

MeanSE EmpiricalMeasure::coordinate_mean(std::size_t i) const {
  return batch_stat([i](const Batch& b) { return b.coord[i]; });
}

double EmpiricalMeasure::exp_moment(std::size_t k) const { return exp_acc_.at(k) / total_weight(); }
double EmpiricalMeasure::gauss_moment(std::size_t k) const { return gauss_acc_.at(k) / total_weight(); }

Vec EmpiricalMeasure::probabilities() const {
  if (!opts_.histogram) return {};
  Vec p(opts_.histogram->cells() + 1, 0.0);
  for (const auto& b : batches_)
    for (std::size_t c = 0; c < p.size(); ++c) p[c] += b.cells[c];
  double t = 0.0;
  for (double v : p) t += v;
  if (t > 0.0)
    for (double& v : p) v /= t;
  return p;
}

MeanSE EmpiricalMeasure::cell_probability(std::size_t cell) const {
  if (!opts_.histogram) throw PreconditionError("measure: no histogram declared");
  return batch_stat([cell](const Batch& b) { return b.cells.at(cell); });
}

std::string EmpiricalMeasure::histogram_csv() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < m_; ++i) os << "bin_lo_" << i + 1 << ',';
  for (std::size_t i = 0; i < m_; ++i) os << "bin_hi_" << i + 1 << ',';
  os << "weight\n";
  if (!opts_.histogram) return os.str();
  const Vec p = probabilities();
  for (std::size_t c = 0; c + 1 < p.size(); ++c) {
    const auto [a, b] = opts_.histogram->cell_bounds(c);
    for (double v : a) os << v << ',';
    for (double v : b) os << v << ',';
    os << p[c] << '\n';
  }
  for (std::size_t i = 0; i < 2 * m_; ++i) os << "nan,";
  os << p.back() << '\n';
  return os.str();
}

std::string EmpiricalMeasure::samples_csv() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < m_; ++i) os << 'x' << i + 1 << ',';
  os << "weight\n";
  for (std::size_t k = 0; k < sample_w_.size(); ++k) {
    for (std::size_t i = 0; i < m_; ++i) os << samples_[k * m_ + i] << ',';
    os << sample_w_[k] << '\n';
  }
  return os.str();
}

}  // namespace hwq
