#include "vrs/bisg.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "vrs/variance_metrics.hpp"

namespace vrs {

namespace {

void check_row_sums_to_one(const std::vector<double>& row, const char* what) {
  double total = 0.0;
  for (double v : row) {
    if (v < -1e-12) throw std::invalid_argument(std::string(what) + ": negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(what) + ": row does not sum to 1");
  }
}

}  // namespace

void SurnameTable::validate() const {
  if (rows.empty()) throw std::invalid_argument("SurnameTable: empty");
  for (const auto& row : rows) {
    if (row.size() != buckets()) {
      throw std::invalid_argument("SurnameTable: ragged rows");
    }
    check_row_sums_to_one(row, "SurnameTable");
  }
}

void GeoTable::validate() const {
  if (rows.empty()) throw std::invalid_argument("GeoTable: empty");
  for (const auto& row : rows) {
    if (row.size() != marginal.size()) {
      throw std::invalid_argument("GeoTable: row width != marginal width");
    }
    check_row_sums_to_one(row, "GeoTable");
  }
  check_row_sums_to_one(marginal, "GeoTable marginal");
  for (double m : marginal) {
    if (m <= 0.0) throw std::invalid_argument("GeoTable: marginal entries must be > 0");
  }
}

BucketDistribution bisg_posterior(int surname_id, int zip_id, const SurnameTable& surnames,
                                  const GeoTable& geo) {
  const auto& p_r_given_s = surnames.rows.at(static_cast<std::size_t>(surname_id));
  const auto& p_r_given_g = geo.rows.at(static_cast<std::size_t>(zip_id));
  const std::size_t n = geo.buckets();
  if (p_r_given_s.size() != n) {
    throw std::invalid_argument("bisg_posterior: table bucket mismatch");
  }
  std::vector<double> unnorm(n, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    // P(g|r) ∝ P(r|g) / P(r); the P(g) factor cancels below.
    unnorm[r] = p_r_given_s[r] * p_r_given_g[r] / geo.marginal[r];
    total += unnorm[r];
  }
  if (total <= 0.0) {
    std::cerr << "[bisg] warning: zero posterior normalizer for surname " << surname_id
              << " zip " << zip_id << ", falling back to uniform\n";
    std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
    return BucketDistribution::from_values(std::move(uniform));
  }
  for (double& v : unnorm) v /= total;
  BucketDistribution d;
  d.values = std::move(unnorm);
  d.defined = true;
  return d;
}

std::string surname_table_to_csv(const SurnameTable& t) {
  std::string out = "surname_id";
  for (std::size_t b = 0; b < t.buckets(); ++b) out += ",p" + std::to_string(b);
  out += "\n";
  char buf[48];
  for (std::size_t s = 0; s < t.rows.size(); ++s) {
    out += std::to_string(s);
    for (double v : t.rows[s]) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

SurnameTable surname_table_from_csv(std::istream& in) {
  SurnameTable t;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = split_csv_line(line);
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(std::stod(fields[i]));
    t.rows.push_back(std::move(row));
  }
  t.validate();
  return t;
}

std::string geo_table_to_csv(const GeoTable& t) {
  std::string out = "zip_id";
  for (std::size_t b = 0; b < t.buckets(); ++b) out += ",p" + std::to_string(b);
  out += "\n";
  char buf[48];
  for (std::size_t z = 0; z < t.rows.size(); ++z) {
    out += std::to_string(z);
    for (double v : t.rows[z]) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out += buf;
    }
    out += "\n";
  }
  out += "marginal";
  for (double v : t.marginal) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v);
    out += buf;
  }
  out += "\n";
  return out;
}

GeoTable geo_table_from_csv(std::istream& in) {
  GeoTable t;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = split_csv_line(line);
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(std::stod(fields[i]));
    if (fields[0] == "marginal") {
      t.marginal = std::move(row);
    } else {
      t.rows.push_back(std::move(row));
    }
  }
  t.validate();
  return t;
}

BisgGroupState::BisgGroupState(std::int64_t ad_id, std::size_t buckets,
                               int aggregation_level, const DPParams& counter_params,
                               std::uint64_t seed)
    : ad_id_(ad_id),
      aggregation_level_(aggregation_level),
      counter_(
          buckets,
          [&] {
            DPParams p = counter_params;
            p.batch_size = kManualFlush;  // batches are driven by the staging list
            return p;
          }(),
          seed) {
  if (aggregation_level_ < 1) {
    throw std::invalid_argument("BisgGroupState: aggregation level must be positive");
  }
}

void BisgGroupState::resolve_batch(const SurnameTable& surnames, const GeoTable& geo) {
  for (const auto& [surname_id, zip_id] : staging_) {
    counter_.add_event(bisg_posterior(surname_id, zip_id, surnames, geo));
  }
  counter_.flush_batch();
  staging_.clear();
}

bool BisgGroupState::ingest_impression(int surname_id, int zip_id,
                                       const SurnameTable& surnames, const GeoTable& geo) {
  staging_.emplace_back(surname_id, zip_id);
  if (static_cast<int>(staging_.size()) >= aggregation_level_) {
    resolve_batch(surnames, geo);
    return true;
  }
  return false;
}

bool BisgGroupState::flush_remaining(const SurnameTable& surnames, const GeoTable& geo) {
  if (staging_.empty()) return false;
  resolve_batch(surnames, geo);
  return true;
}

BucketDistribution BisgGroupState::race_ratios() const {
  return delivery_ratio(counter_.read_counts());
}

}  // namespace vrs
