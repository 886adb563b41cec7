// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(regclass::cli::run(std::env::args_os()));
}
