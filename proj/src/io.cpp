#include "hrc/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace hrc {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << "line " << line << ": " << what;
  throw Error(os.str());
}

double parse_real(const std::string& field, std::size_t line, const char* column) {
  const auto s = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    fail(line, std::string("invalid number '") + s + "' in column " + column);
  return v;
}

int parse_binary(const std::string& field, std::size_t line, const char* column) {
  const auto s = trim(field);
  if (s == "0") return 0;
  if (s == "1") return 1;
  fail(line, std::string("column ") + column + " must be 0 or 1, got '" + s + "'");
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

LoadedSample read_sample_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw Error("input CSV is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  auto header = split(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 4 || header[0] != "id" || header[1] != "time" || header[2] != "event" ||
      header[3] != "treatment")
    fail(1, "header must start with id,time,event,treatment");
  std::vector<std::string> names(header.begin() + 4, header.end());

  std::vector<SubjectRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      std::ostringstream os;
      os << "expected " << header.size() << " fields, got " << fields.size();
      fail(line_no, os.str());
    }
    SubjectRecord r;
    r.id = trim(fields[0]);
    r.time = parse_real(fields[1], line_no, "time");
    if (r.time < 0.0) fail(line_no, "time must be nonnegative");
    r.event = parse_binary(fields[2], line_no, "event") == 1;
    r.treatment = parse_binary(fields[3], line_no, "treatment");
    for (std::size_t c = 0; c < names.size(); ++c)
      r.covariates.push_back(parse_real(fields[4 + c], line_no, names[c].c_str()));
    records.push_back(std::move(r));
  }
  if (records.empty()) throw Error("input CSV has no data rows");
  return {SurvivalSample(std::move(records)), std::move(names)};
}

LoadedSample read_sample_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input file '" + path + "'");
  return read_sample_csv(in);
}

void write_sample_csv(std::ostream& out, const SurvivalSample& sample,
                      const std::vector<std::string>& covariate_names) {
  out << "id,time,event,treatment";
  for (std::size_t c = 0; c < sample.covariate_count(); ++c)
    out << ',' << (covariate_names.empty() ? "z" + std::to_string(c + 1) : covariate_names[c]);
  out << '\n';
  for (const auto& r : sample.records()) {
    out << r.id << ',' << format_double(r.time) << ',' << (r.event ? 1 : 0) << ',' << r.treatment;
    for (double z : r.covariates) out << ',' << format_double(z);
    out << '\n';
  }
}

void write_hidden_csv(std::ostream& out, const SimulatedDataset& data) {
  out << "id,v,t0,t1,c\n";
  for (std::size_t i = 0; i < data.sample.size(); ++i)
    out << data.sample[i].id << ',' << format_double(data.frailty[i]) << ','
        << format_double(data.t0[i]) << ',' << format_double(data.t1[i]) << ','
        << format_double(data.censoring[i]) << '\n';
}

void write_balance_csv(std::ostream& out, const std::vector<BalanceRow>& rows) {
  out << "covariate,smd_unweighted,smd_weighted\n";
  for (const auto& r : rows)
    out << r.covariate << ',' << format_double(r.smd_unweighted) << ','
        << format_double(r.smd_weighted) << '\n';
}

}  // namespace hrc
