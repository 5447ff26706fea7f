#include "lformer/config_file.hpp"

#include <fstream>
#include <sstream>

#include "lformer/model_io.hpp"

namespace lformer::config {

RunConfig parse_run_config(const std::string& text) {
    RunConfig c;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        // strip comments and whitespace-only lines
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (io::apply_config_line(c.model, key, value)) continue;
            if (key == "lr")
                c.adam.lr = std::stod(value);
            else if (key == "beta1")
                c.adam.beta1 = std::stod(value);
            else if (key == "beta2")
                c.adam.beta2 = std::stod(value);
            else if (key == "weight_decay")
                c.adam.weight_decay = std::stod(value);
            else if (key == "alpha")
                c.alpha = std::stod(value);
            else if (key == "batch")
                c.batch = std::stoul(value);
            else if (key == "steps")
                c.steps = std::stoll(value);
            else if (key == "decay_steps")
                c.decay_steps = std::stoll(value);
            else if (key == "decay_factor")
                c.decay_factor = std::stod(value);
            else if (key == "checkpoint_every")
                c.checkpoint_every = std::stoll(value);
            else if (key == "workers")
                c.workers = std::stoi(value);
            else
                throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
        } catch (const std::invalid_argument&) {
            throw ConfigError("config line " + std::to_string(lineno) + ": bad value for '" + key +
                              "'");
        }
    }
    c.model.validate();
    if (c.batch < 1) throw ConfigError("config: batch must be >= 1");
    if (c.workers < 1) throw ConfigError("config: workers must be >= 1");
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config file " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse_run_config(os.str());
}

std::string run_config_to_string(const RunConfig& c) {
    std::ostringstream os;
    os << io::config_to_lines(c.model);
    os << "lr=" << c.adam.lr << "\n";
    os << "beta1=" << c.adam.beta1 << "\n";
    os << "beta2=" << c.adam.beta2 << "\n";
    os << "weight_decay=" << c.adam.weight_decay << "\n";
    os << "alpha=" << c.alpha << "\n";
    os << "batch=" << c.batch << "\n";
    os << "steps=" << c.steps << "\n";
    os << "decay_steps=" << c.decay_steps << "\n";
    os << "decay_factor=" << c.decay_factor << "\n";
    os << "checkpoint_every=" << c.checkpoint_every << "\n";
    os << "workers=" << c.workers << "\n";
    return os.str();
}

}  // namespace lformer::config
