#ifndef HVDCMC_CSV_HPP
#define HVDCMC_CSV_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hvdcmc/mc_engine.hpp"
#include "hvdcmc/simulator.hpp"
#include "hvdcmc/te_estimator.hpp"

namespace hvdcmc {

/// Malformed or unreadable CSV input. `line` is 1-based (0 when not tied to a line).
class CsvError : public std::runtime_error {
public:
  CsvError(const std::string &what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

/// 17 significant digits, so text round-trips every double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    std::string_view f = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    out.emplace_back(f);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Header plus string cells; blank lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines; ///< source line of each row

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    return std::nullopt;
  }

  std::size_t require_column(std::string_view name) const {
    if (auto c = column(name)) return *c;
    throw CsvError("missing column '" + std::string(name) + "'", 1);
  }

  double number(std::size_t row, std::size_t col) const {
    const auto v = parse_double(rows[row][col]);
    if (!v) throw CsvError("column '" + header[col] + "': not a number '" + rows[row][col] + "'", row_lines[row]);
    return *v;
  }
};

inline CsvTable read_csv(std::istream &in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_fields(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw CsvError("expected " + std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()),
                     line_no);
    t.rows.push_back(std::move(fields));
    t.row_lines.push_back(line_no);
  }
  if (t.header.empty()) throw CsvError("empty file");
  return t;
}

inline CsvTable read_csv_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  try {
    return read_csv(in);
  } catch (const CsvError &e) {
    throw CsvError(path + ": " + e.what());
  }
}

inline std::ofstream open_output(const std::string &path) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write '" + path + "'");
  return out;
}

// --- PMU / trajectory -------------------------------------------------------

/// A PMU stream row; measured DC current and ground truth are optional.
struct PmuRow {
  PmuSample sample;
  std::optional<double> i_d;
};

inline void write_trajectory_csv(std::ostream &out, const std::vector<TrajectoryRecord> &traj) {
  out << "t,v_re,v_im,i_re,i_im,e_re_true,e_im_true,r_true,x_true,zd_re_true,zd_im_true,i_d_true\n";
  for (const auto &r : traj) {
    const auto &s = r.sample;
    out << format_double(s.t) << ',' << format_double(s.v.real()) << ',' << format_double(s.v.imag()) << ','
        << format_double(s.i.real()) << ',' << format_double(s.i.imag()) << ',' << format_double(r.e_true.real())
        << ',' << format_double(r.e_true.imag()) << ',' << format_double(r.z_true.r) << ','
        << format_double(r.z_true.x) << ',' << format_double(r.z_d_true.real()) << ','
        << format_double(r.z_d_true.imag()) << ',' << format_double(r.i_d_true) << '\n';
  }
}

/// Reads `t,v_re,v_im,i_re,i_im[,...]`. An `i_d` column, when present, is the measured DC
/// current in kA. Columns ending in `_true` are ignored.
inline std::vector<PmuRow> read_pmu_csv(std::istream &in, const std::string &terminal_id) {
  const CsvTable t = read_csv(in);
  const std::size_t ct = t.require_column("t"), cvr = t.require_column("v_re"), cvi = t.require_column("v_im"),
                    cir = t.require_column("i_re"), cii = t.require_column("i_im");
  const auto cid = t.column("i_d");
  std::vector<PmuRow> out;
  out.reserve(t.rows.size());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    PmuRow row;
    row.sample.t = t.number(k, ct);
    row.sample.v = {t.number(k, cvr), t.number(k, cvi)};
    row.sample.i = {t.number(k, cir), t.number(k, cii)};
    row.sample.terminal_id = terminal_id;
    if (cid) row.i_d = t.number(k, *cid);
    if (!out.empty() && !(row.sample.t > out.back().sample.t))
      throw CsvError("timestamps must be strictly increasing", t.row_lines[k]);
    out.push_back(row);
  }
  return out;
}

// --- estimator / capacity outputs --------------------------------------------

inline void write_te_header(std::ostream &out) { out << "t,r,x,e_re,e_im,held_over,n_window\n"; }

/// No-estimate rows carry nan impedance and potential.
inline void write_te_row(std::ostream &out, double t, const std::optional<TheveninEstimate> &te) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out << format_double(t) << ',' << format_double(te ? te->r : nan) << ',' << format_double(te ? te->x : nan) << ','
      << format_double(te ? te->e.real() : nan) << ',' << format_double(te ? te->e.imag() : nan) << ','
      << (te && te->held_over ? 1 : 0) << ',' << (te ? te->n_window : 0) << '\n';
}

struct TeRow {
  double t = 0.0;
  std::optional<TheveninEstimate> te;
};

inline std::vector<TeRow> read_te_csv(std::istream &in) {
  const CsvTable tab = read_csv(in);
  const std::size_t ct = tab.require_column("t"), cr = tab.require_column("r"), cx = tab.require_column("x"),
                    cer = tab.require_column("e_re"), cei = tab.require_column("e_im"),
                    ch = tab.require_column("held_over"), cn = tab.require_column("n_window");
  std::vector<TeRow> out;
  for (std::size_t k = 0; k < tab.rows.size(); ++k) {
    TeRow row;
    row.t = tab.number(k, ct);
    const double r = tab.number(k, cr);
    if (!std::isnan(r)) {
      TheveninEstimate te;
      te.t = row.t;
      te.r = r;
      te.x = tab.number(k, cx);
      te.e = {tab.number(k, cer), tab.number(k, cei)};
      te.held_over = tab.number(k, ch) != 0.0;
      te.n_window = static_cast<std::size_t>(tab.number(k, cn));
      row.te = te;
    }
    out.push_back(row);
  }
  return out;
}

inline void write_mc_header(std::ostream &out) { out << "t,mc_power,binding,i_d_at_mc\n"; }

inline void write_mc_row(std::ostream &out, const McResult &r) {
  out << format_double(r.t) << ',' << format_double(r.mc_power) << ',' << to_string(r.binding) << ','
      << format_double(r.i_d_at_mc) << '\n';
}

struct McRow {
  double t = 0.0;
  double mc_power = 0.0;
  Binding binding = Binding::none;
  double i_d_at_mc = 0.0;
};

inline std::vector<McRow> read_mc_csv(std::istream &in) {
  const CsvTable tab = read_csv(in);
  const std::size_t ct = tab.require_column("t"), cp = tab.require_column("mc_power"),
                    cb = tab.require_column("binding"), ci = tab.require_column("i_d_at_mc");
  std::vector<McRow> out;
  for (std::size_t k = 0; k < tab.rows.size(); ++k) {
    McRow row;
    row.t = tab.number(k, ct);
    row.mc_power = tab.number(k, cp);
    try {
      row.binding = parse_binding(tab.rows[k][cb]);
    } catch (const std::invalid_argument &e) {
      throw CsvError(e.what(), tab.row_lines[k]);
    }
    row.i_d_at_mc = tab.number(k, ci);
    out.push_back(row);
  }
  return out;
}

/// Full sweep of one McResult, for inspection.
inline void write_sweep_csv(std::ostream &out, const McResult &r) {
  out << "i_d,v_dr,v_di,alpha_deg,gamma_deg,p_dr,p_di,q_dr,q_di,e_dr,e_di\n";
  for (const auto &p : r.sweep) {
    const auto &op = p.op;
    out << format_double(p.i_d) << ',' << format_double(op.v_dr) << ',' << format_double(op.v_di) << ','
        << format_double(rad_to_deg(op.alpha)) << ',' << format_double(rad_to_deg(op.gamma)) << ','
        << format_double(op.p_dr) << ',' << format_double(op.p_di) << ',' << format_double(op.q_dr) << ','
        << format_double(op.q_di) << ',' << format_double(op.e_dr) << ',' << format_double(op.e_di) << '\n';
  }
}

inline void write_allocation_csv(std::ostream &out, const AllocationPlan &plan) {
  out << "hvdc,initial_mw,mc_mw,margin_mw,target_mw,remaining_mw\n";
  for (std::size_t k = 0; k < plan.entries.size(); ++k) {
    const auto &e = plan.entries[k];
    out << k + 1 << ',' << format_double(e.initial_mw) << ',' << format_double(e.mc_mw) << ','
        << format_double(e.margin_mw) << ',' << format_double(e.target_mw) << ',' << format_double(e.remaining_mw)
        << '\n';
  }
}

inline void write_allocation_summary_csv(std::ostream &out, const AllocationPlan &plan) {
  out << "shortage_mw,allocated_mw,deficit_mw,remaining_margin_mw\n"
      << format_double(plan.shortage_mw) << ',' << format_double(plan.allocated_mw) << ','
      << format_double(plan.deficit_mw) << ',' << format_double(plan.remaining_margin_mw) << '\n';
}

} // namespace hvdcmc

#endif // HVDCMC_CSV_HPP
