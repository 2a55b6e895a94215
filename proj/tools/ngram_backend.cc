// Built-in n-gram model served over the backend wire protocol, on stdio or TCP.

#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "nounprobe/error.hpp"
#include "nounprobe/ngram.hpp"
#include "nounprobe/protocol.hpp"

int main(int argc, char** argv) {
  CLI::App app{"n-gram language model backend", "ngram_backend"};
  std::string corpus;
  std::string id = "ngram";
  nounprobe::NgramOptions opts;
  std::optional<std::uint16_t> listen;
  bool serve_stdio = false;
  app.add_option("--corpus", corpus, "training corpus, one sentence per line")->required()->check(CLI::ExistingFile);
  app.add_option("--id", id, "backend id reported in the handshake");
  app.add_option("--order", opts.order, "n-gram order");
  app.add_option("--k", opts.k, "add-k smoothing constant");
  app.add_option("--finetune-weight", opts.finetune_weight, "count weight of one fine-tuning sentence per epoch");
  app.add_flag("--serve", serve_stdio, "serve on stdin/stdout (the default)");
  app.add_option("--listen", listen, "serve on 127.0.0.1:PORT instead of stdio (0 picks a port)")
      ->excludes("--serve");
  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(corpus);
    nounprobe::NgramBackend backend(id, nounprobe::NgramModel::train(in, opts));
    nounprobe::ProtocolServer server(backend);
    if (listen) {
      nounprobe::serve_tcp(server, *listen, [](std::uint16_t port) {
        std::cout << "listening on 127.0.0.1:" << port << std::endl;
      });
    } else {
      std::ios::sync_with_stdio(false);
      server.serve(std::cin, std::cout);
    }
  } catch (const nounprobe::ConfigError& e) {
    std::cerr << "ngram_backend: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ngram_backend: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
