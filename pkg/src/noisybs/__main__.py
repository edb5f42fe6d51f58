from noisybs.cli import main

main()
