#include "climattr/app.hpp"

int main(int argc, char** argv) {
    return climattr::app::run(argc, argv);
}
