from qmetop.cli import main

main()
