// Prints one PASS/FAIL line per acceptance check. Exits 0 once every check has
// been evaluated; failures are reported, not turned into a test error.
//
// usage: acceptance [--quick] [--report FILE] [--output-dir DIR]

#include <fstream>
#include <iostream>
#include <sstream>

#include "ptherm/acceptance.hpp"

int main(int argc, char** argv) {
    ptherm::AcceptanceOptions opt;
    std::string report;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--quick") opt.quick = true;
        else if (a == "--report" && i + 1 < argc) report = argv[++i];
        else if (a == "--output-dir" && i + 1 < argc) opt.csv_dir = argv[++i];
    }
    opt.threads = ptherm::sweep_threads();
    opt.log = [](const std::string& s) { std::cerr << "  " << s << '\n'; };
    int failed = 0;
    std::ostringstream lines;
    for (const auto& r : ptherm::run_acceptance(opt)) {
        lines << ptherm::format_result(r) << '\n';
        std::cout << ptherm::format_result(r) << std::endl;
        if (!r.passed) ++failed;
    }
    lines << failed << " of 9 checks failed\n";
    std::cout << failed << " of 9 checks failed" << std::endl;
    if (!report.empty()) std::ofstream(report) << lines.str();
    return 0;
}
