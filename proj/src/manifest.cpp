#include <fstream>
#include <set>

#include <neuroqc/error.hpp>
#include <neuroqc/manifest.hpp>

namespace neuroqc {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute()? path: base/path;
}

std::string relative_to(const std::filesystem::path& base, const std::filesystem::path& p) {
    if (base.empty()) return p.generic_string();
    auto rel = p.lexically_relative(base);
    if (rel.empty() || *rel.begin() == "..") return p.generic_string();
    return rel.generic_string();
}

manifest_reconstruction reconstruction_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
    manifest_reconstruction r;
    r.id = j.at("id").get<std::uint64_t>();
    r.swc = resolve(base, j.at("swc").get<std::string>());
    if (j.contains("labels")) r.labels = resolve(base, j.at("labels").get<std::string>());
    if (j.contains("truth")) r.truth = resolve(base, j.at("truth").get<std::string>());
    return r;
}

nlohmann::json reconstruction_json(const manifest_reconstruction& r, const std::filesystem::path& base) {
    nlohmann::json j = {{"id", r.id}, {"swc", relative_to(base, r.swc)}};
    if (r.labels) j["labels"] = relative_to(base, *r.labels);
    if (r.truth) j["truth"] = relative_to(base, *r.truth);
    return j;
}

} // anonymous namespace

manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
    try {
        manifest m;
        m.threshold = j.value("threshold", 4.0);
        std::set<std::uint64_t> neuron_ids, reconstruction_ids;
        for (const auto& n: j.at("neurons")) {
            manifest_neuron e;
            e.neuron_id = n.at("neuron_id").get<std::uint64_t>();
            if (!neuron_ids.insert(e.neuron_id).second) {
                throw data_error("manifest lists neuron " + std::to_string(e.neuron_id) + " twice");
            }
            e.volume = resolve(base, n.at("volume").get<std::string>());
            e.correct = reconstruction_from_json(n.at("correct"), base);
            if (n.contains("wrong")) {
                for (const auto& w: n.at("wrong")) e.wrong.push_back(reconstruction_from_json(w, base));
            }
            if (!reconstruction_ids.insert(e.correct.id).second) {
                throw data_error("manifest reuses reconstruction id " + std::to_string(e.correct.id));
            }
            for (const auto& w: e.wrong) {
                if (!reconstruction_ids.insert(w.id).second) {
                    throw data_error("manifest reuses reconstruction id " + std::to_string(w.id));
                }
            }
            m.neurons.push_back(std::move(e));
        }
        return m;
    }
    catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed manifest: ") + e.what());
    }
}

manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception& e) {
        throw data_error(path.string() + ": " + e.what());
    }
    return manifest_from_json(j, path.parent_path());
}

nlohmann::json to_json(const manifest& m, const std::filesystem::path& base) {
    nlohmann::json neurons = nlohmann::json::array();
    for (const auto& n: m.neurons) {
        nlohmann::json wrong = nlohmann::json::array();
        for (const auto& w: n.wrong) wrong.push_back(reconstruction_json(w, base));
        neurons.push_back({
            {"neuron_id", n.neuron_id},
            {"volume", relative_to(base, n.volume)},
            {"correct", reconstruction_json(n.correct, base)},
            {"wrong", std::move(wrong)},
        });
    }
    return {{"threshold", m.threshold}, {"coordinate_units", "voxel"}, {"neurons", std::move(neurons)}};
}

} // namespace neuroqc
