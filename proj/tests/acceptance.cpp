// Acceptance gate: runs `jmate verify --all` twice and prints one line per
// criterion. Usage: acceptance <jmate> [work dir]

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Runtime budgets in seconds, per criterion.
constexpr double kBudget[] = {0, 60, 1, 10, 30, 30, 30, 300, 300};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool run(const std::string& jmate, const fs::path& dir) {
    fs::create_directories(dir);
    const std::string cmd = "\"" + jmate + "\" verify --all --out \"" + dir.string() + "\" > \"" +
                            (dir / "log.txt").string() + "\" 2>&1";
    // Nonzero exit just means some check failed; the report says which.
    [[maybe_unused]] const int status = std::system(cmd.c_str());
    return fs::exists(dir / "verify.json");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <jmate> [work dir]\n";
        return 2;
    }
    const std::string jmate = argv[1];
    const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "jm_acceptance";
    fs::remove_all(work);

    if (!run(jmate, work / "run1")) {
        std::cout << "[FAIL] verify --all produced no report, see " << (work / "run1" / "log.txt").string() << '\n';
        return 1;
    }
    const json rep = json::parse(slurp(work / "run1" / "verify.json"));
    const json times = json::parse(slurp(work / "run1" / "timings.json"));
    int failed = 0;
    for (int id = 1; id <= 8; ++id) {
        const json* check = nullptr;
        for (const auto& c : rep["checks"])
            if (c["id"] == id) check = &c;
        if (!check) {
            std::cout << "[FAIL] " << id << ". missing from the report\n";
            ++failed;
            continue;
        }
        const double t = times.value(std::to_string(id), 1e9);
        const bool in_time = t < kBudget[id];
        const bool ok = (*check)["passed"].get<bool>() && in_time;
        failed += !ok;
        char timing[64];
        std::snprintf(timing, sizeof timing, "%.1f s of %.0f s", t, kBudget[id]);
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << id << ". " << (*check)["name"].get<std::string>() << ": "
                  << (*check)["summary"].get<std::string>() << " (" << timing << (in_time ? "" : ", over budget")
                  << ")\n";
        std::cout.flush();
    }

    const bool second = run(jmate, work / "run2");
    const bool same_report = second && slurp(work / "run1" / "verify.json") == slurp(work / "run2" / "verify.json");
    const bool same_image = second && slurp(work / "run1" / "mating.ppm") == slurp(work / "run2" / "mating.ppm");
    const bool det = same_report && same_image;
    failed += !det;
    std::cout << (det ? "[PASS] " : "[FAIL] ") << "9. determinism: two verify --all runs give "
              << (same_report ? "byte-identical" : "DIFFERENT") << " reports and "
              << (same_image ? "byte-identical" : "DIFFERENT") << " rasters ("
              << fs::file_size(work / "run1" / "verify.json") << " bytes)\n";
    std::cout << (failed == 0 ? "all 9 criteria pass\n" : std::to_string(failed) + " criteria fail\n");
    return failed == 0 ? 0 : 1;
}
