// Scripted completion endpoint for tests and dry runs.
//
//   halm-mock-server --script script.jsonl --port 8080
//
// GET /_log returns the request log as JSON. Stops on SIGINT/SIGTERM.

#include <halm/mock_service.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Scripted text-generation endpoint"};
    std::string script_path;
    int port = 8080;
    std::string host = "127.0.0.1";
    app.add_option("--script", script_path, "Script file (JSON lines)");
    app.add_option("--port", port, "Port, 0 for any free port")->capture_default_str();
    app.add_option("--host", host, "Bind address")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    // Block the stop signals before any server thread exists, then wait for one here.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    try {
        halm::mock::Script script = script_path.empty() ? halm::mock::Script{} : halm::mock::load_script(script_path);
        halm::mock::MockService service(std::move(script));
        service.start(port, host);
        std::cout << "listening on " << host << ":" << service.port() << std::endl;
        int sig = 0;
        sigwait(&stop_signals, &sig);
        service.stop();
    } catch (const halm::Error& e) {
        std::cerr << "halm-mock-server: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    }
    return 0;
}
