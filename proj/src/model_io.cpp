#include "lformer/model_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lformer/data.hpp"

namespace fs = std::filesystem;

namespace lformer::io {

std::string config_to_lines(const model::LFormerConfig& c) {
    std::ostringstream os;
    os << "bands=" << c.bands << "\n";
    os << "width=" << c.width << "\n";
    os << "blocks=" << c.blocks << "\n";
    os << "kernel=" << c.kernel << "\n";
    os << "variant=" << model::to_string(c.variant) << "\n";
    os << "ratio=" << c.ratio << "\n";
    os << "heads=" << c.heads << "\n";
    os << "seed=" << c.seed << "\n";
    return os.str();
}

bool apply_config_line(model::LFormerConfig& c, const std::string& key, const std::string& value) {
    if (key == "bands")
        c.bands = std::stoul(value);
    else if (key == "width")
        c.width = std::stoul(value);
    else if (key == "blocks")
        c.blocks = std::stoul(value);
    else if (key == "kernel")
        c.kernel = std::stoul(value);
    else if (key == "variant")
        c.variant = model::variant_from_string(value);
    else if (key == "ratio")
        c.ratio = std::stoul(value);
    else if (key == "heads")
        c.heads = std::stoul(value);
    else if (key == "seed")
        c.seed = std::stoull(value);
    else
        return false;
    return true;
}

void save_checkpoint(const std::string& dir, const model::LFormerModel<float>& m,
                     const train::AdamState<float>* adam, std::int64_t step) {
    fs::create_directories(fs::path(dir) / "params");
    if (adam) fs::create_directories(fs::path(dir) / "adam");

    const auto params = m.parameters();
    std::ostringstream os;
    os << config_to_lines(m.config);
    os << "step=" << step << "\n";
    os << "adam=" << (adam ? 1 : 0) << "\n";
    for (std::size_t i = 0; i < params.size(); ++i) {
        os << "param=" << params[i].name << "\n";
        data::save_tensor((fs::path(dir) / "params" / (params[i].name + ".lftk")).string(),
                          params[i].tensor);
        if (adam) {
            data::save_tensor((fs::path(dir) / "adam" / (params[i].name + ".m.lftk")).string(),
                              Tensor<float>({adam->m[i].size()}, adam->m[i]));
            data::save_tensor((fs::path(dir) / "adam" / (params[i].name + ".v.lftk")).string(),
                              Tensor<float>({adam->v[i].size()}, adam->v[i]));
        }
    }
    std::ofstream f(fs::path(dir) / "manifest.txt", std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint manifest in " + dir);
    f << os.str();
}

Checkpoint load_checkpoint(const std::string& dir) {
    std::ifstream f(fs::path(dir) / "manifest.txt");
    if (!f) throw DataError("no checkpoint manifest in " + dir);

    model::LFormerConfig config;
    std::int64_t step = 0;
    bool has_adam = false;
    std::vector<std::string> names;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("checkpoint manifest: expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (apply_config_line(config, key, value)) continue;
        if (key == "step")
            step = std::stoll(value);
        else if (key == "adam")
            has_adam = value == "1";
        else if (key == "param")
            names.push_back(value);
        else
            throw DataError("checkpoint manifest: unknown key '" + key + "'");
    }

    Checkpoint ck;
    ck.model = model::build<float>(config);
    ck.step = step;
    ck.has_adam = has_adam;

    auto params = ck.model.parameters();
    if (params.size() != names.size())
        throw DataError("checkpoint lists " + std::to_string(names.size()) + " parameters, model has " +
                        std::to_string(params.size()));
    if (has_adam) init_adam(ck.adam, params);
    ck.adam.step = step;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != names[i])
            throw DataError("checkpoint parameter order mismatch at " + names[i]);
        Tensor<float> t =
            data::load_tensor<float>((fs::path(dir) / "params" / (names[i] + ".lftk")).string());
        if (t.shape() != params[i].tensor.shape())
            throw DataError("checkpoint parameter " + names[i] + " has shape " +
                            shape_str(t.shape()) + ", expected " +
                            shape_str(params[i].tensor.shape()));
        auto dst = params[i].tensor.raw_data();
        std::copy(t.data().begin(), t.data().end(), dst.begin());
        if (has_adam) {
            Tensor<float> tm = data::load_tensor<float>(
                (fs::path(dir) / "adam" / (names[i] + ".m.lftk")).string());
            Tensor<float> tv = data::load_tensor<float>(
                (fs::path(dir) / "adam" / (names[i] + ".v.lftk")).string());
            if (tm.numel() != params[i].tensor.numel() || tv.numel() != params[i].tensor.numel())
                throw DataError("checkpoint optimizer state size mismatch at " + names[i]);
            ck.adam.m[i].assign(tm.data().begin(), tm.data().end());
            ck.adam.v[i].assign(tv.data().begin(), tv.data().end());
        }
    }
    return ck;
}

}  // namespace lformer::io
