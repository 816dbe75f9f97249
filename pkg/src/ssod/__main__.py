from ssod.cli import main

main()
