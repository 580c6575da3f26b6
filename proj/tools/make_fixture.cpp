// Regenerates the bundled field-trial-shaped fixture: data.csv and
// schema.json under the given directory. Run with a seed to refresh the
// committed copy; the tests and bundled configs read the files, not this
// program.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "rctsyn/fixture.hpp"

int main(int argc, char **argv) {
  if (argc != 3) {
    std::cerr << "usage: make_fixture <seed> <out_dir>\n";
    return 2;
  }
  try {
    const auto seed = static_cast<std::uint64_t>(std::stoull(argv[1]));
    const std::filesystem::path dir(argv[2]);
    std::filesystem::create_directories(dir);
    const rctsyn::Fixture f = rctsyn::make_fixture(seed);
    rctsyn::write_csv_file(f.data, (dir / "data.csv").string());
    std::ofstream sj(dir / "schema.json");
    sj << f.schema.to_json().dump(2) << '\n';
    std::cout << "wrote " << (dir / "data.csv").string() << " ("
              << f.data.n_rows() << " rows)\n";
    return 0;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
