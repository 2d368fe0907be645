from qcorr.cli import main

main()
