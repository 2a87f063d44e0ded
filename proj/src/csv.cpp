#include "ethlab/csv.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ethlab {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& kind, const std::vector<std::string>& columns,
                     int version)
    : columns_(columns.size()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# ethlab:" << kind << " v" << version << '\n';
    for (std::size_t k = 0; k < columns.size(); ++k) out_ << (k ? "," : "") << columns[k];
    out_ << '\n';
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }

CsvWriter& CsvWriter::cell(long long v) { return cell(std::to_string(v)); }

CsvWriter& CsvWriter::cell(const std::string& v) {
    if (pending_ >= columns_) throw std::logic_error("too many CSV cells in row");
    out_ << (pending_ ? "," : "") << v;
    ++pending_;
    return *this;
}

void CsvWriter::end_row() {
    if (pending_ != columns_) throw std::logic_error("CSV row has " + std::to_string(pending_) + " cells, expected " +
                                                     std::to_string(columns_));
    out_ << '\n';
    pending_ = 0;
}

void CsvWriter::row(const std::vector<double>& values) {
    for (double v : values) cell(v);
    end_row();
}

}  // namespace ethlab
