#include <CLI11.hpp>
#include <iostream>

#include "oblog/config.hpp"
#include "oblog/params.hpp"

int main(int argc, char** argv) {
    CLI::App app{"deployment parameter calculator"};
    std::string config_path;
    uint64_t users = 1000;
    bool as_json = false;
    app.add_option("--config", config_path, "deployment config file")->required();
    app.add_option("--users", users, "online users (m), the measured side of the table");
    app.add_flag("--json", as_json, "emit json instead of the table");
    CLI11_PARSE(app, argc, argv);

    try {
        oblog::Config cfg = oblog::load_config(config_path);
        std::cout << (as_json ? oblog::params::render_json(cfg, users)
                              : oblog::params::render_table(cfg, users));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
