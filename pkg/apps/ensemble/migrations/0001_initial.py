# Generated by Django 5.0.6 on 2026-10-12 09:14

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='FittedEnsemble',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=100)),
                ('mode', models.CharField(choices=[('pseudo-auc', 'Pseudo-observation AUC'), ('binary-nnloglik', 'IPCW binary NNloglik')], max_length=20)),
                ('t_star', models.FloatField()),
                ('grid', models.JSONField(default=list)),
                ('cause', models.PositiveSmallIntegerField(default=1)),
                ('payload', models.JSONField()),
                ('artifact_path', models.CharField(max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
