// Writes a randomly initialised weight bundle for testing and benchmarking.

#include "densesvm/backbone.hpp"
#include "densesvm/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace densesvm::backbone;
    CLI::App app{"Generate a random weight bundle", "make_bundle"};
    std::string arch = "densenet121";
    std::string out;
    std::uint64_t seed = 1;
    bool shift = false;
    int width = 8;
    app.add_option("--arch", arch, "densenet121, tiny, residual or mobile")
        ->capture_default_str()
        ->check(CLI::IsMember({"densenet121", "tiny", "residual", "mobile"}));
    app.add_option("--out", out, "Output bundle directory")->required();
    app.add_option("--seed", seed, "Weight seed")->capture_default_str();
    app.add_flag("--random-shift", shift, "Draw non-zero BN shifts and means");
    app.add_option("--width", width, "Channel width for the toy graphs")->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    try {
        const InitOptions init{.seed = seed, .random_shift = shift};
        const NetworkGraph g = arch == "densenet121" ? build_densenet(densenet121_config(), init)
                               : arch == "tiny"      ? build_densenet(tiny_densenet_config(), init)
                               : arch == "residual"  ? build_residual_toy(width, init)
                                                     : build_mobile_toy(width, init);
        save_weight_bundle(g, out);
        std::cout << "wrote " << g.name() << " (" << g.feature_dim() << "-d, " << g.parameter_count()
                  << " parameters) to " << out << '\n';
    } catch (const densesvm::Error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
