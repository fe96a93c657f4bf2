#include "likert/cli.hpp"

int main(int argc, char** argv) {
    return likert::cli::run(argc, argv);
}
