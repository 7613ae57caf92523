#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hwq/fit.hpp"
#include "hwq/model.hpp"

namespace hwq {

struct HistogramSpec {
  Vec lo, hi;
  std::vector<std::size_t> bins;  // per coordinate

  std::size_t cells() const;
  // Cell index, or cells() for points outside the box (the overflow cell).
  std::size_t index(std::span<const double> x) const;
  std::pair<Vec, Vec> cell_bounds(std::size_t cell) const;
  static HistogramSpec uniform(std::size_t m, double lo, double hi, std::size_t bins);
};

struct MeasureOptions {
  std::optional<HistogramSpec> histogram;
  Vec exp_rates;    // δ for ∫exp(δ‖x‖₁)
  Vec gauss_rates;  // δ for ∫exp(δ‖x‖₁²)
  std::size_t batches = 20;
};

// Weighted occupation measure (time-weighted for paths) with batch-resolved accumulators
// for standard errors. Thinned samples are kept separately for tail fits.
class EmpiricalMeasure {
public:
  EmpiricalMeasure() = default;
  EmpiricalMeasure(std::size_t m, MeasureOptions opts);

  void add(std::span<const double> x, double weight, std::size_t batch);
  void add_sample(std::span<const double> x, double weight = 1.0);
  // Batch-wise sums; callers merge replicas in a fixed order so totals are reproducible.
  void merge(const EmpiricalMeasure& other);

  std::size_t dim() const { return m_; }
  const MeasureOptions& options() const { return opts_; }
  double total_weight() const;
  MeanSE neg_sum() const;  // ∫⟨e,x⟩⁻
  MeanSE l1() const;       // ∫‖x‖₁
  MeanSE coordinate_mean(std::size_t i) const;
  double exp_moment(std::size_t k) const;
  double gauss_moment(std::size_t k) const;
  Vec probabilities() const;  // histogram cells plus trailing overflow cell, summing to 1
  MeanSE cell_probability(std::size_t cell) const;

  std::size_t sample_count() const { return sample_w_.size(); }
  std::span<const double> sample(std::size_t k) const { return {samples_.data() + k * m_, m_}; }
  double sample_weight(std::size_t k) const { return sample_w_[k]; }

  std::string histogram_csv() const;
  std::string samples_csv() const;

private:
  struct Batch {
    double w = 0.0, neg = 0.0, l1 = 0.0;
    Vec coord;
    Vec cells;
  };
  MeanSE batch_stat(const std::function<double(const Batch&)>& num) const;

  std::size_t m_ = 0;
  MeasureOptions opts_;
  std::vector<Batch> batches_;
  Vec exp_acc_, gauss_acc_;
  Vec samples_, sample_w_;
};

}  // namespace hwq
