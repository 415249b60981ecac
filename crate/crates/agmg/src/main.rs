use clap::Parser;

fn main() {
    let cli = agmg::cli::Cli::parse();
    let code = agmg::cli::execute(cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
