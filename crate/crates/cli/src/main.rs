#[tokio::main]
async fn main() {
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let code = abl_cli::run(std::env::args_os(), &mut out, &mut err).await;
    std::process::exit(code);
}
