// Reference implementation of the external-scorer line protocol, used by
// the tests and as a template for wiring up real scorers. Reads
// {"id","hyp","ref"} JSON lines from stdin and answers {"id","score"}.
//
// Modes:
//   constant  score = --value (default 0.5)
//   overlap   Jaccard overlap of whitespace tokens (content-sensitive,
//             good for batch-invariance checks)
// Options:
//   --omit-id ID   never answer this id (protocol-violation testing)
//   --log FILE     append each request id to FILE

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

using nlohmann::json;

namespace {

double overlap_score(const std::string& hyp, const std::string& ref) {
    std::set<std::string> h, r;
    std::istringstream hs(hyp), rs(ref);
    std::string tok;
    while (hs >> tok) h.insert(tok);
    while (rs >> tok) r.insert(tok);
    if (h.empty() && r.empty()) {
        return 1.0;
    }
    int common = 0;
    for (const std::string& t : h) {
        common += r.count(t) ? 1 : 0;
    }
    const int unions = static_cast<int>(h.size() + r.size()) - common;
    return unions == 0 ? 1.0 : static_cast<double>(common) / unions;
}

}  // namespace

int main(int argc, char** argv) {
    std::string mode = "constant";
    std::string omit_id;
    std::string log_path;
    double value = 0.5;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&]() -> std::string {
            if (i + 1 >= argc) {
                std::cerr << "missing value for " << arg << "\n";
                std::exit(2);
            }
            return argv[++i];
        };
        if (arg == "--mode") {
            mode = next();
        } else if (arg == "--value") {
            value = std::stod(next());
        } else if (arg == "--omit-id") {
            omit_id = next();
        } else if (arg == "--log") {
            log_path = next();
        } else {
            std::cerr << "unknown flag " << arg << "\n";
            return 2;
        }
    }

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::app);
    }

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) {
            continue;
        }
        json req;
        try {
            req = json::parse(line);
        } catch (const json::exception&) {
            std::cerr << "stub-scorer: bad request line\n";
            return 1;
        }
        const std::string id = req.at("id").get<std::string>();
        if (log.is_open()) {
            log << id << '\n';
            log.flush();
        }
        if (!omit_id.empty() && id == omit_id) {
            continue;
        }
        const double score = mode == "overlap"
                                 ? overlap_score(req.at("hyp").get<std::string>(),
                                                 req.at("ref").get<std::string>())
                                 : value;
        json resp{{"id", id}, {"score", score}};
        std::cout << resp.dump() << '\n';
        std::cout.flush();
    }
    return 0;
}
