from liftc.cli import main

main()
