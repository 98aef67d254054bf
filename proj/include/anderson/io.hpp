#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace anderson {

// Shortest decimal that reads back to the same double.
std::string format_double(double x);

// Accumulates CSV text: a header row then data rows, '\n' terminated.
class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header);

    CsvWriter& cell(double x);
    CsvWriter& cell(long long x);
    CsvWriter& cell(unsigned long long x);
    CsvWriter& cell(std::size_t x) { return cell(static_cast<unsigned long long>(x)); }
    CsvWriter& cell(int x) { return cell(static_cast<long long>(x)); }
    CsvWriter& cell(std::string_view s);
    void end_row();

    const std::string& text() const { return text_; }

private:
    void separate();
    std::string text_;
    std::size_t columns_;
    std::size_t in_row_ = 0;
};

// Writes to a temporary sibling then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);

}  // namespace anderson
