#include "sbranch/model.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sbranch {

namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& locus) {
    if (!obj.is_object()) throw ModelError(locus, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ModelError(locus, "missing key '" + key + "'");
    return *it;
}

double as_number(const json& v, const std::string& locus) {
    if (!v.is_number()) throw ModelError(locus, "expected a number");
    return v.get<double>();
}

Configuration parse_config_object(const json& v, const TypeSpace& types,
                                  const std::string& locus) {
    if (!v.is_object()) throw ModelError(locus, "expected an object of label -> count");
    std::vector<Configuration::Entry> entries;
    for (const auto& [key, val] : v.items()) {
        double label = 0.0;
        try {
            std::size_t used = 0;
            label = std::stod(key, &used);
            if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
            throw ModelError(locus, "key '" + key + "' is not a numeric type label");
        }
        auto idx = types.index_of(label);
        if (!idx) throw ModelError(locus, "type label " + key + " is not declared in types[]");
        if (!val.is_number_integer() || val.get<std::int64_t>() < 1)
            throw ModelError(locus + "." + key, "count must be an integer >= 1");
        entries.emplace_back(*idx, static_cast<std::uint32_t>(val.get<std::int64_t>()));
    }
    try {
        return Configuration(std::move(entries));
    } catch (const DomainError& e) {
        throw ModelError(locus, e.what());
    }
}

}  // namespace

Model parse_model(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ModelError("(document)", e.what());
    }

    // types[]
    const json& jtypes = require(root, "types", "model");
    if (!jtypes.is_array() || jtypes.empty())
        throw ModelError("types", "expected a nonempty array of labels");
    std::vector<double> labels;
    for (std::size_t i = 0; i < jtypes.size(); ++i)
        labels.push_back(as_number(jtypes[i], "types[" + std::to_string(i) + "]"));
    std::optional<TypeSpace> types;
    try {
        types.emplace(labels);
    } catch (const DomainError& e) {
        throw ModelError("types", e.what());
    }

    // law[]
    const json& jlaw = require(root, "law", "model");
    if (!jlaw.is_array()) throw ModelError("law", "expected an array of per-type laws");
    std::vector<TypeLaw> per_type(types->size());
    std::vector<bool> seen(types->size(), false);
    for (std::size_t i = 0; i < jlaw.size(); ++i) {
        const std::string locus = "law[" + std::to_string(i) + "]";
        const json& item = jlaw[i];
        const double label = as_number(require(item, "type", locus), locus + ".type");
        auto idx = types->index_of(label);
        if (!idx) throw ModelError(locus + ".type", "label not declared in types[]");
        if (seen[*idx]) throw ModelError(locus + ".type", "duplicate law for this type");
        seen[*idx] = true;

        TypeLaw tl;
        tl.rate = as_number(require(item, "rate", locus), locus + ".rate");
        const json& joff = require(item, "offspring", locus);
        if (!joff.is_array()) throw ModelError(locus + ".offspring", "expected an array");
        for (std::size_t k = 0; k < joff.size(); ++k) {
            const std::string olocus = locus + ".offspring[" + std::to_string(k) + "]";
            const json& oitem = joff[k];
            OffspringEntry entry;
            entry.prob = as_number(require(oitem, "prob", olocus), olocus + ".prob");
            entry.config =
                parse_config_object(require(oitem, "config", olocus), *types, olocus + ".config");
            tl.offspring.push_back(std::move(entry));
        }
        per_type[*idx] = std::move(tl);
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i] && root.contains("law"))
            per_type[i] = TypeLaw{};  // type with no law: rate 0, frozen

    std::optional<std::uint32_t> brood_cap;
    if (root.contains("brood_cap")) {
        const json& jb = root["brood_cap"];
        if (!jb.is_number_integer() || jb.get<std::int64_t>() < 0)
            throw ModelError("brood_cap", "expected an integer >= 0");
        brood_cap = static_cast<std::uint32_t>(jb.get<std::int64_t>());
    }

    std::optional<ParticleLaw> law;
    try {
        law.emplace(*types, std::move(per_type), brood_cap);
    } catch (const DomainError& e) {
        // Re-locate normalization failures to the offending law entry.
        std::string msg = e.what();
        std::string locus = "law";
        const std::string tag = "type index ";
        if (auto pos = msg.find(tag); pos != std::string::npos) {
            const std::size_t idx = std::stoul(msg.substr(pos + tag.size()));
            locus = "law(type " + std::to_string(types->label(idx)) + ")";
        }
        throw ModelError(locus, msg);
    }

    // stopping[]
    std::vector<Configuration> stopping;
    if (root.contains("stopping")) {
        const json& jstop = root["stopping"];
        if (!jstop.is_array()) throw ModelError("stopping", "expected an array");
        for (std::size_t i = 0; i < jstop.size(); ++i) {
            const std::string locus = "stopping[" + std::to_string(i) + "]";
            Configuration c = parse_config_object(jstop[i], *types, locus);
            if (c.empty())
                throw ModelError(locus,
                                 "the empty configuration cannot be a stopping state");
            stopping.push_back(std::move(c));
        }
    }

    // truncation
    const json& jtrunc = require(root, "truncation", "model");
    if (!jtrunc.is_number_integer() || jtrunc.get<std::int64_t>() < 1)
        throw ModelError("truncation", "expected an integer >= 1");

    Model model{*types, std::move(*law), StoppingSet(stopping),
                static_cast<std::uint32_t>(jtrunc.get<std::int64_t>()), SeriesControl{}, 1};

    // controls{}
    if (root.contains("controls")) {
        const json& jc = root["controls"];
        if (!jc.is_object()) throw ModelError("controls", "expected an object");
        if (jc.contains("k_max")) model.controls.k_max = jc["k_max"].get<int>();
        if (jc.contains("tail_tol")) model.controls.tail_tol = jc["tail_tol"].get<double>();
        if (jc.contains("quad_nodes")) model.controls.quad_nodes = jc["quad_nodes"].get<int>();
        try {
            model.controls.validate();
        } catch (const DomainError& e) {
            throw ModelError("controls", e.what());
        }
    }

    // seeds{}
    if (root.contains("seeds")) {
        const json& js = root["seeds"];
        if (!js.is_object() || !js.contains("master") || !js["master"].is_number_integer())
            throw ModelError("seeds", "expected an object with integer key 'master'");
        model.master_seed = js["master"].get<std::uint64_t>();
    }
    return model;
}

Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("(file)", "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

Configuration Model::parse_configuration(const std::string& text) const {
    // Bare integer shorthand for single-type models.
    if (types.size() == 1 && text.find(':') == std::string::npos) {
        try {
            std::size_t used = 0;
            const long n = std::stol(text, &used);
            if (used == text.size() && n >= 0)
                return n == 0 ? Configuration()
                              : Configuration::single(0, static_cast<std::uint32_t>(n));
        } catch (const std::exception&) {
        }
        throw ModelError("(configuration)", "cannot parse '" + text + "'");
    }
    if (text == "0" || text.empty()) return {};

    std::vector<Configuration::Entry> entries;
    std::istringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos)
            throw ModelError("(configuration)", "expected label:count in '" + part + "'");
        double label = 0.0;
        long count = 0;
        try {
            label = std::stod(part.substr(0, colon));
            count = std::stol(part.substr(colon + 1));
        } catch (const std::exception&) {
            throw ModelError("(configuration)", "cannot parse '" + part + "'");
        }
        auto idx = types.index_of(label);
        if (!idx)
            throw ModelError("(configuration)", "type label " + part.substr(0, colon) +
                                                    " is not declared in the model");
        if (count < 1) throw ModelError("(configuration)", "counts must be >= 1");
        entries.emplace_back(*idx, static_cast<std::uint32_t>(count));
    }
    return Configuration(std::move(entries));
}

}  // namespace sbranch
