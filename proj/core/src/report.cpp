#include <cstdio>
#include <ostream>
#include <string>

#include "stylid/pipeline.hpp"

namespace stylid {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void ExperimentReport::write_csv(std::ostream& os, bool with_timing) const {
  os << "face_id,order,intensity,attr_loss,ffc,seed,ms\n";
  for (const ReportRow& r : rows) {
    os << r.face_id << ',' << r.order << ',' << num(r.intensity) << ',' << num(r.attr_loss) << ',' << num(r.ffc)
       << ',' << r.seed << ',' << (with_timing ? fixed(r.ms, 3) : std::string("0")) << '\n';
  }
}

std::string ExperimentReport::summary() const {
  return "cells=" + std::to_string(cells) + " win_rate=" + fixed(100.0 * win_rate, 2) +
         "% strict_wins=" + std::to_string(strict_wins) + " mean_loss_ps=" + num(mean_loss_ps) +
         " mean_loss_sp=" + num(mean_loss_sp);
}

void AttentionReport::write_csv(std::ostream& os, bool with_timing) const {
  os << "face_id,arm,seed,ffc,face_mass,ms\n";
  for (const AttentionRow& r : rows) {
    os << r.face_id << ',' << r.arm << ',' << r.seed << ',' << num(r.ffc) << ',' << num(r.face_mass) << ','
       << (with_timing ? fixed(r.ms, 3) : std::string("0")) << '\n';
  }
}

std::string AttentionReport::summary() const {
  return "rows=" + std::to_string(rows.size()) + " mean_ffc_baseline=" + fixed(mean_ffc_baseline, 6) +
         " mean_ffc_identity=" + fixed(mean_ffc_identity, 6) + " face_mass_baseline=" + fixed(mean_mass_baseline, 6) +
         " face_mass_identity=" + fixed(mean_mass_identity, 6);
}

}  // namespace stylid
