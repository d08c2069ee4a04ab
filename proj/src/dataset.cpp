#include "coxlin/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

namespace coxlin {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view token, double& value) {
  if (token.empty()) return false;
  // from_chars rejects a leading '+', which is valid CSV number syntax.
  if (token.front() == '+') token.remove_prefix(1);
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

bool parse_event(std::string_view token, bool& value) {
  std::string lowered(token);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lowered == "1" || lowered == "true") {
    value = true;
    return true;
  }
  if (lowered == "0" || lowered == "false") {
    value = false;
    return true;
  }
  return false;
}

std::string row_label(int row, int line) {
  std::ostringstream os;
  os << "row " << row << " (line " << line << ")";
  return os.str();
}

}  // namespace

SurvivalDataset::SurvivalDataset(std::vector<Observation> observations, int covariate_dim)
    : observations_(std::move(observations)), covariate_dim_(covariate_dim) {
  if (covariate_dim_ < 0) throw DataError("covariate dimension must be nonnegative");
  if (observations_.empty()) throw DataError("dataset must contain at least one observation");
  bool any_event = false;
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    const Observation& obs = observations_[i];
    if (!std::isfinite(obs.time) || obs.time <= 0.0) {
      throw DataError("row " + std::to_string(i + 1) + ": follow-up time must be positive and finite");
    }
    if (obs.covariates.size() != covariate_dim_) {
      throw DataError("row " + std::to_string(i + 1) + ": expected " + std::to_string(covariate_dim_) +
                      " covariates, got " + std::to_string(obs.covariates.size()));
    }
    if (!obs.covariates.allFinite()) {
      throw DataError("row " + std::to_string(i + 1) + ": covariates must be finite");
    }
    any_event = any_event || obs.event;
  }
  if (!any_event) throw DataError("dataset contains no events");
}

int SurvivalDataset::event_count() const {
  return static_cast<int>(std::count_if(observations_.begin(), observations_.end(),
                                        [](const Observation& o) { return o.event; }));
}

double SurvivalDataset::max_time() const {
  double t = 0.0;
  for (const auto& o : observations_) t = std::max(t, o.time);
  return t;
}

SurvivalDataset validate_dataset(const std::vector<RawObservation>& raw) {
  if (raw.empty()) throw DataError("dataset must contain at least one observation");
  const int p = static_cast<int>(raw.front().covariates.size());
  std::vector<Observation> obs;
  obs.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const RawObservation& r = raw[i];
    if (static_cast<int>(r.covariates.size()) != p) {
      throw DataError("row " + std::to_string(i + 1) + ": inconsistent covariate lengths (expected " +
                      std::to_string(p) + ", got " + std::to_string(r.covariates.size()) + ")");
    }
    Observation o;
    o.time = r.time;
    o.event = r.event;
    o.covariates = Eigen::Map<const Eigen::VectorXd>(r.covariates.data(), p);
    obs.push_back(std::move(o));
  }
  return SurvivalDataset(std::move(obs), p);
}

SurvivalDataset parse_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  bool have_header = false;
  int p = 0;
  std::vector<RawObservation> rows;
  int row_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (!have_header) {
      if (fields.size() < 2 || fields[0] != "time" || fields[1] != "event") {
        throw DataError("header mismatch: expected 'time,event,z1,...,zp'");
      }
      for (std::size_t j = 2; j < fields.size(); ++j) {
        if (fields[j] != "z" + std::to_string(j - 1)) {
          throw DataError("header mismatch: column " + std::to_string(j + 1) + " should be 'z" +
                          std::to_string(j - 1) + "'");
        }
      }
      p = static_cast<int>(fields.size()) - 2;
      have_header = true;
      continue;
    }
    ++row_no;
    if (static_cast<int>(fields.size()) != p + 2) {
      throw DataError(row_label(row_no, line_no) + ": expected " + std::to_string(p + 2) + " fields, got " +
                      std::to_string(fields.size()));
    }
    RawObservation r{0.0, false, std::vector<double>(static_cast<std::size_t>(p))};
    if (!parse_double(fields[0], r.time)) {
      throw DataError(row_label(row_no, line_no) + ": invalid time '" + std::string(fields[0]) + "'");
    }
    if (!parse_event(fields[1], r.event)) {
      throw DataError(row_label(row_no, line_no) + ": invalid event indicator '" + std::string(fields[1]) +
                      "' (expected 0, 1, true or false)");
    }
    for (int j = 0; j < p; ++j) {
      if (!parse_double(fields[static_cast<std::size_t>(j + 2)], r.covariates[static_cast<std::size_t>(j)])) {
        throw DataError(row_label(row_no, line_no) + ": invalid covariate z" + std::to_string(j + 1));
      }
    }
    rows.push_back(std::move(r));
  }
  if (!have_header) throw DataError("empty file");
  if (rows.empty()) throw DataError("file has a header but no data rows");
  return validate_dataset(rows);
}

SurvivalDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return parse_csv(in);
}

void write_csv(const SurvivalDataset& data, std::ostream& out) {
  const int p = data.covariate_dim();
  out << "time,event";
  for (int j = 1; j <= p; ++j) out << ",z" << j;
  out << '\n';
  char buf[32];
  for (const auto& o : data.observations()) {
    std::snprintf(buf, sizeof buf, "%.17g", o.time);
    out << buf << ',' << (o.event ? 1 : 0);
    for (int j = 0; j < p; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", o.covariates[j]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void write_csv(const SurvivalDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_csv(data, out);
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

}  // namespace coxlin
