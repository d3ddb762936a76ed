#include <fstream>

#include "icubench/models.hpp"

namespace icubench::models {

namespace {
constexpr int kFormatVersion = 1;
}

json TrainedModel::to_json() const {
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = kind;
    j["feature_names"] = feature_names;
    j["seed"] = seed;
    j["rounds_used"] = rounds_used;
    j["iterations_used"] = iterations_used;
    if (is_gbt()) {
        json trees = json::array();
        for (const auto& t : gbt.trees) {
            json nodes = json::array();
            for (const auto& nd : t.nodes) {
                nodes.push_back({{"f", nd.feature},
                                 {"t", nd.threshold},
                                 {"ml", nd.missing_left},
                                 {"l", nd.left},
                                 {"r", nd.right},
                                 {"v", nd.value}});
            }
            trees.push_back(std::move(nodes));
        }
        j["gbt"] = {{"trees", std::move(trees)},
                    {"base_score", gbt.base_score},
                    {"learning_rate", gbt.learning_rate},
                    {"task", gbt.task == TaskKind::classification ? "classification" : "regression"}};
    } else {
        j["linear"] = {{"coef", linear.coef}, {"intercept", linear.intercept}, {"logistic", linear.logistic}};
    }
    return j;
}

TrainedModel TrainedModel::from_json(const json& j) {
    auto c = cursor(j, "model");
    int version = static_cast<int>(c.at("format_version").get_int());
    if (version != kFormatVersion)
        throw DataError("unsupported model format version " + std::to_string(version));
    TrainedModel m;
    m.kind = c.at("kind").get_string();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.seed = j.value("seed", 0ull);
    m.rounds_used = j.value("rounds_used", 0);
    m.iterations_used = j.value("iterations_used", 0);
    if (m.is_gbt()) {
        auto g = c.at("gbt");
        m.gbt.base_score = g.at("base_score").get_number();
        m.gbt.learning_rate = g.at("learning_rate").get_number();
        m.gbt.task = g.at("task").get_string() == "regression" ? TaskKind::regression
                                                               : TaskKind::classification;
        for (const auto& tj : *g.at("trees").node) {
            GbtTree tree;
            for (const auto& nj : tj) {
                GbtTreeNode nd;
                nd.feature = nj.at("f").get<int>();
                nd.threshold = nj.at("t").get<double>();
                nd.missing_left = nj.at("ml").get<bool>();
                nd.left = nj.at("l").get<int>();
                nd.right = nj.at("r").get<int>();
                nd.value = nj.at("v").get<double>();
                tree.nodes.push_back(nd);
            }
            m.gbt.trees.push_back(std::move(tree));
        }
    } else if (m.kind == "logreg" || m.kind == "elasticnet") {
        auto l = c.at("linear");
        m.linear.coef = j.at("linear").at("coef").get<std::vector<double>>();
        m.linear.intercept = l.at("intercept").get_number();
        m.linear.logistic = l.at("logistic").get_bool();
    } else {
        throw DataError("unknown model kind '" + m.kind + "'");
    }
    return m;
}

void TrainedModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json().dump();
    if (!out) throw DataError("write failed: " + path.string());
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(parse_json_strict(text, path.string()));
}

}  // namespace icubench::models
