#include "sres/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace sres {

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json measure_to_json(const AtomicMeasure& x) {
    json atoms = json::array();
    for (const Atom& a : x.atoms()) atoms.push_back({{"t", a.loc.t}, {"s", a.loc.s}, {"w", a.w}});
    return {{"atoms", atoms}};
}

AtomicMeasure measure_from_json(const json& j) {
    try {
        std::vector<Atom> atoms;
        for (const auto& a : j.at("atoms")) atoms.push_back({{a.at("t").get<double>(), a.at("s").get<double>()}, a.at("w").get<double>()});
        return AtomicMeasure(std::move(atoms));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("measure: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

Window window_from_json(const json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "gaussian") {
            double sigma = j.at("sigma").get<double>();
            if (j.contains("centers")) return Window::gaussian(j.at("centers").get<std::vector<double>>(), sigma);
            return Window::gaussian_uniform(j.at("M").get<int>(), sigma);
        }
        if (kind == "monomial") return Window::monomial(j.at("M").get<int>());
        if (kind == "tabulated")
            return Window::tabulated(j.at("nodes").get<std::vector<double>>(),
                                     j.at("values").get<std::vector<std::vector<double>>>());
        throw ConfigError("window: unknown kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("window: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

json window_to_json(const Window& w) {
    switch (w.kind()) {
    case Window::Kind::Gaussian: return {{"kind", "gaussian"}, {"sigma", w.sigma()}, {"centers", w.centers()}};
    case Window::Kind::Monomial: return {{"kind", "monomial"}, {"M", w.size()}};
    case Window::Kind::Tabulated: return {{"kind", "tabulated"}, {"nodes", w.nodes()}, {"values", w.table()}};
    }
    return {};
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw Error("cannot write " + path.string());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) std::fprintf(f, j ? ",%.17g" : "%.17g", m(i, j));
        std::fputc('\n', f);
    }
    std::fclose(f);
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError(path.string() + ": bad number '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows[0].size()) throw ConfigError(path.string() + ": ragged rows");
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    if (!m.allFinite()) throw ConfigError(path.string() + ": non-finite entries");
    return m;
}

void write_observation(const std::filesystem::path& csv_path, const Observation& obs) {
    write_matrix_csv(csv_path, obs.y);
    std::filesystem::path side = csv_path;
    side.replace_extension(".json");
    write_json_file(side, {{"delta", obs.delta}});
}

Observation read_observation(const std::filesystem::path& csv_path) {
    Observation obs;
    obs.y = read_matrix_csv(csv_path);
    if (obs.y.rows() != obs.y.cols()) throw ConfigError(csv_path.string() + ": observation must be square");
    std::filesystem::path side = csv_path;
    side.replace_extension(".json");
    if (std::filesystem::exists(side)) {
        json j = read_json_file(side);
        obs.delta = j.value("delta", 0.0);
        if (!(obs.delta >= 0)) throw ConfigError(side.string() + ": delta must be nonnegative");
    }
    return obs;
}

}  // namespace sres
