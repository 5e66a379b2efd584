use clap::Parser;

fn main() {
    let cli = cbpois_cli::Cli::parse();
    match cbpois_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
