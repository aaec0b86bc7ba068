from qcurv.cli import main

main()
