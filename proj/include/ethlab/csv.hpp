#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace ethlab {

// CSV with a leading "# ethlab:<kind> v<version>" line so readers can tell
// layouts apart. Numbers are written with round-trip precision.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& kind, const std::vector<std::string>& columns,
              int version = 1);

    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(const std::string& v);
    void end_row();
    void row(const std::vector<double>& values);

private:
    std::ofstream out_;
    std::size_t columns_ = 0;
    std::size_t pending_ = 0;
};

std::string format_double(double v);

}  // namespace ethlab
