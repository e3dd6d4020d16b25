use clap::Parser;

fn main() {
    let cli = match byzcap::cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; exit 2 is kept for invariant violations
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    std::process::exit(byzcap::cli::run(cli));
}
