from crpse_provider.service import serve_main

if __name__ == "__main__":
    raise SystemExit(serve_main())
