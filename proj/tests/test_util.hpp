#pragma once

// Shared helpers for the test executables only.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace testutil {

// Self-cleaning scratch directory under the system temp root.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::random_device rd;
        char buf[32];
        std::snprintf(buf, sizeof buf, "phx-test-%08x", rd());
        path = std::filesystem::temp_directory_path() / buf;
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Recursive byte comparison of two directory trees.
inline bool trees_identical(const std::filesystem::path& a, const std::filesystem::path& b,
                            std::string* first_diff = nullptr) {
    namespace fs = std::filesystem;
    std::vector<fs::path> rel_a, rel_b;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel_a.push_back(fs::relative(e.path(), a));
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
    std::sort(rel_a.begin(), rel_a.end());
    std::sort(rel_b.begin(), rel_b.end());
    if (rel_a != rel_b) {
        if (first_diff) *first_diff = "file lists differ";
        return false;
    }
    for (const fs::path& r : rel_a) {
        if (read_bytes(a / r) != read_bytes(b / r)) {
            if (first_diff) *first_diff = r.string();
            return false;
        }
    }
    return true;
}

}  // namespace testutil
